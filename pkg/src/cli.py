#!/usr/bin/env python3
"""
Transaction Simulator - Command Line Interface

Run seeded transaction trials and numerical checks, writing JSON (or CSV)
result documents.

Usage:
    python cli.py run-transactions --scenario scenario.json
    python cli.py check-born --preset born_three_way --deterministic
    python cli.py propagator-table --k0 2 --kabs 0 --eps 0.1 --format csv
    python cli.py golden-rule --t 50
    python cli.py coherent-state --alpha-re 2 --nmax 32
    python cli.py factorization-check --modes 16 --pairs 10 --seed 7

Examples:
    # Born-rule check on a bundled preset, 8 worker threads
    python cli.py check-born --preset born_three_way --workers 8 --out born.json

    # Propagator grid as a table
    python cli.py propagator-table --k0 0.5 1 2 --kabs 1 --eps 0.1 0.01 --format csv

    # Reuse archived results, then inspect or clear the archive
    python cli.py golden-rule --t 10 --cache-dir ./cache
    python cli.py cache --cache-dir ./cache --history 5
    python cli.py cache --cache-dir ./cache --clear

Exit codes:
    0 success, 1 simulation error, 2 usage error (an error object is written for 1 and 2)
"""

import argparse
import itertools
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

# Add src directory to path for imports
sys.path.insert(0, str(Path(__file__).parent))

import numpy as np
from scipy import stats

from cache import ResultCache, result_key
from documents import (
    build_error_document,
    build_result_document,
    format_csv,
    format_json,
    load_preset,
    load_scenario_file,
    scenario_to_document,
)
from hilbert import (
    FieldMode,
    FockSpace,
    SpacetimePoint,
    coherent_state,
    fock_state,
    mean_field_amplitude,
    photon_number_distribution,
    photon_number_stats,
    poisson_tail_mass,
)
from perturbation import decay_rate_per_mode, emission_matrix_element, golden_rule_report
from propagators import PropagatorPoint, factorization_check, propagator_row
from transactions import (
    ResponseKind,
    Scenario,
    TrialStats,
    any_response_probability,
    expected_responders,
    nonunitarity_trace,
    run_trials,
)
from utils import (
    DEFAULT_CACHE_DIR,
    DEFAULT_WORKERS,
    LIBRARY_VERSION,
    InternalError,
    SimulationError,
    UsageError,
    flatten_complex_columns,
    logger,
    to_jsonable,
)


SUBCOMMANDS = (
    "run-transactions",
    "check-born",
    "propagator-table",
    "golden-rule",
    "coherent-state",
    "factorization-check",
)
SCENARIO_SUBCOMMANDS = ("run-transactions", "check-born")
CACHE_SUBCOMMAND = "cache"
FORMATS = ("json", "csv")
STDOUT = "-"

# Born check significance level (chi-square critical value 13.82 at 2 dof)
BORN_SIGNIFICANCE = 1e-3
BORN_SIGMAS = 3.0


@dataclass
class RunConfig:
    """
    Options for one CLI invocation.

    Attributes:
        subcommand: One of SUBCOMMANDS.
        scenario_path: Scenario JSON file, if any.
        preset: Bundled preset name, used when scenario_path is unset.
        output_path: Output file, or "-" for standard output.
        format: "json" or "csv".
        deterministic: Omit the generated_at timestamp.
        workers: Thread count for Monte Carlo subcommands (never echoed).
        cache_dir: Result archive directory; None disables caching.
        params: Subcommand-specific numeric options.
    """
    subcommand: str
    scenario_path: Optional[Path] = None
    preset: Optional[str] = None
    output_path: str = STDOUT
    format: str = "json"
    deterministic: bool = False
    workers: int = DEFAULT_WORKERS
    cache_dir: Optional[Path] = None
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise SimulationError(f"Unknown subcommand: {self.subcommand}", {"subcommand": self.subcommand})
        if self.format not in FORMATS:
            raise SimulationError(f"Unknown format: {self.format}", {"format": self.format})
        if self.scenario_path is not None:
            self.scenario_path = Path(self.scenario_path)


@dataclass
class Computation:
    """Inputs echo of a run plus the deferred computation producing (results, rows)."""
    inputs: Dict[str, Any]
    seed: Optional[int]
    warnings: List[str]
    compute: Callable[[], Tuple[Any, List[Dict[str, Any]]]]


def _load_scenario(config: RunConfig, required: bool = True) -> Tuple[Optional[Scenario], List[str]]:
    if config.scenario_path is not None:
        return load_scenario_file(config.scenario_path)
    if config.preset:
        return load_preset(config.preset)
    if required:
        raise SimulationError(f"{config.subcommand} needs --scenario or --preset")
    return None, []


def _absorber_rows(scenario: Scenario, trial_stats: TrialStats) -> List[Dict[str, Any]]:
    frequencies = trial_stats.empirical_freq
    return [
        {
            "id": absorber_id,
            "weight": float(weight),
            "count": trial_stats.counts[absorber_id],
            "expected": trial_stats.expected[absorber_id],
            "empirical_freq": frequencies[absorber_id],
        }
        for absorber_id, weight in zip(scenario.absorber_ids, scenario.born_weights)
    ]


def prepare_run_transactions(config: RunConfig) -> Computation:
    scenario, warnings = _load_scenario(config)

    def compute():
        trial_stats = run_trials(scenario, workers=config.workers)
        results = trial_stats.to_dict()
        results["nonunitarity"] = nonunitarity_trace(scenario).to_dict()

        model = scenario.response_model
        if model.kind == ResponseKind.BERNOULLI:
            mean, sigma = expected_responders(scenario.n_absorbers, model.p)
            results["expected_responders"] = {"mean": mean, "sigma": sigma}
            results["any_response_probability"] = any_response_probability(scenario.n_absorbers, model.p)
        return results, _absorber_rows(scenario, trial_stats)

    return Computation(
        inputs={"scenario": scenario_to_document(scenario)},
        seed=scenario.seed,
        warnings=warnings,
        compute=compute,
    )


def prepare_check_born(config: RunConfig) -> Computation:
    scenario, warnings = _load_scenario(config)
    if scenario.trials == 0:
        raise SimulationError("check-born needs a scenario with trials > 0")

    def compute():
        trial_stats = run_trials(scenario, workers=config.workers)
        events = trial_stats.event_count
        if events == 0:
            raise SimulationError("No trial produced an event", {"trials": trial_stats.trials})

        rows = []
        within = {}
        for absorber_id, weight in zip(scenario.absorber_ids, scenario.born_weights):
            weight = float(weight)
            frequency = trial_stats.counts[absorber_id] / events
            sigma = math.sqrt(weight * (1.0 - weight) / events)
            within[absorber_id] = abs(frequency - weight) <= BORN_SIGMAS * sigma
            rows.append({
                "id": absorber_id,
                "weight": weight,
                "count": trial_stats.counts[absorber_id],
                "frequency": frequency,
                "sigma": sigma,
                "within_3_sigma": within[absorber_id],
            })

        critical = float(stats.chi2.isf(BORN_SIGNIFICANCE, trial_stats.dof)) if trial_stats.dof >= 1 else None
        results = {
            "trials": trial_stats.trials,
            "events": events,
            "no_event_count": trial_stats.no_event_count,
            "weights": {row["id"]: row["weight"] for row in rows},
            "counts": dict(trial_stats.counts),
            "empirical_freq": {row["id"]: row["frequency"] for row in rows},
            "within_3_sigma": within,
            "chi_square": trial_stats.chi_square,
            "dof": trial_stats.dof,
            "p_value": trial_stats.p_value,
            "critical_value": critical,
            "passed": bool(critical is not None and trial_stats.chi_square < critical and all(within.values())),
            "diagnostic_only": scenario.response_model.kind == ResponseKind.BERNOULLI,
        }
        return results, rows

    return Computation(
        inputs={"scenario": scenario_to_document(scenario)},
        seed=scenario.seed,
        warnings=warnings,
        compute=compute,
    )


def prepare_propagator_table(config: RunConfig) -> Computation:
    k0_values = [float(v) for v in config.params["k0"]]
    kabs_values = [float(v) for v in config.params["kabs"]]
    eps_values = [float(v) for v in config.params["eps"]]
    points = [
        PropagatorPoint(k0, k_abs, epsilon)
        for k0, k_abs, epsilon in itertools.product(k0_values, kabs_values, eps_values)
    ]

    def compute():
        rows = [propagator_row(p) for p in points]
        return {"rows": rows}, rows

    return Computation(
        inputs={"k0": k0_values, "kabs": kabs_values, "eps": eps_values},
        seed=None,
        warnings=[],
        compute=compute,
    )


def prepare_golden_rule(config: RunConfig) -> Computation:
    t = float(config.params["t"])
    scenario, warnings = _load_scenario(config, required=False)
    inputs: Dict[str, Any] = {"t": t}
    if scenario is not None:
        inputs["scenario"] = scenario_to_document(scenario)

    def compute():
        results = golden_rule_report(t).to_dict()
        rows = [dict(results)]

        if scenario is not None and scenario.coupling is not None:
            rates = {}
            for absorber in scenario.absorbers:
                m_emit = emission_matrix_element(scenario.coupling, absorber.mode, 0)
                rates[absorber.id] = {
                    "matrix_element": m_emit,
                    "rate": decay_rate_per_mode(scenario.coupling, absorber.mode, t, scenario.emitter),
                    "golden_rule_rate": 2.0 * math.pi * abs(m_emit) ** 2,
                }
            results["decay_rates"] = rates
        return results, rows

    return Computation(inputs=inputs, seed=None, warnings=warnings, compute=compute)


def prepare_coherent_state(config: RunConfig) -> Computation:
    alpha = complex(float(config.params["alpha_re"]), float(config.params["alpha_im"]))
    n_max = int(config.params["nmax"])

    def compute():
        space = FockSpace.single_mode(n_max)
        coherent = coherent_state(alpha, space)
        coherent_mean, coherent_var = photon_number_stats(coherent)

        n_fock = min(int(round(abs(alpha) ** 2)), n_max)
        number = fock_state(n_fock, space)
        fock_mean, fock_var = photon_number_stats(number)

        results = {
            "alpha": alpha,
            "n_max": n_max,
            "coherent": {
                "mean": coherent_mean,
                "variance": coherent_var,
                "mean_field": mean_field_amplitude(coherent, space),
                "tail_mass": poisson_tail_mass(abs(alpha) ** 2, n_max),
            },
            "fock": {
                "n": n_fock,
                "mean": fock_mean,
                "variance": fock_var,
                "mean_field": mean_field_amplitude(number, space),
            },
        }
        rows = [
            {"n": n, "p_coherent": float(p_coh), "p_fock": float(p_fock)}
            for n, (p_coh, p_fock) in enumerate(
                zip(photon_number_distribution(coherent), photon_number_distribution(number))
            )
        ]
        return results, rows

    return Computation(
        inputs={"alpha": alpha, "n_max": n_max},
        seed=None,
        warnings=[],
        compute=compute,
    )


def _random_modes(rng: np.random.Generator, count: int) -> List[FieldMode]:
    modes: List[FieldMode] = []
    signatures = set()
    while len(modes) < count:
        mode = FieldMode(rng.normal(size=3))
        if mode.signature not in signatures:
            signatures.add(mode.signature)
            modes.append(mode)
    return modes


def _random_point(rng: np.random.Generator) -> SpacetimePoint:
    return SpacetimePoint(rng.uniform(-1.0, 1.0, size=3), float(rng.uniform(-1.0, 1.0)))


def prepare_factorization_check(config: RunConfig) -> Computation:
    scenario, warnings = _load_scenario(config, required=False)
    params = config.params
    seed = int(params.get("seed", 0))
    pairs = int(params.get("pairs", 10))
    component = int(params.get("component", 0))
    volume = float(params.get("volume", 1.0))

    if pairs < 1:
        raise SimulationError("--pairs must be at least 1", {"pairs": pairs})

    inputs: Dict[str, Any] = {"seed": seed, "pairs": pairs, "component": component}
    if scenario is not None:
        inputs["scenario"] = scenario_to_document(scenario)
        if scenario.coupling is not None:
            volume = scenario.coupling.volume
    else:
        n_modes = int(params.get("modes", 4))
        if n_modes < 1:
            raise SimulationError("--modes must be at least 1", {"modes": n_modes})
        inputs["modes"] = n_modes
    inputs["volume"] = volume

    def compute():
        rng = np.random.default_rng(seed)
        modes = scenario.modes if scenario is not None else _random_modes(rng, inputs["modes"])

        rows = []
        for index in range(pairs):
            x, y = _random_point(rng), _random_point(rng)
            report = factorization_check(modes, x, y, volume, component)
            rows.append({"pair": index, **report.to_dict()})

        results = {
            "n_modes": len(modes),
            "max_abs_deviation": max(row["max_abs_deviation"] for row in rows),
            "pairs": rows,
        }
        return results, rows

    return Computation(inputs=inputs, seed=seed, warnings=warnings, compute=compute)


PREPARERS: Dict[str, Callable[[RunConfig], Computation]] = {
    "run-transactions": prepare_run_transactions,
    "check-born": prepare_check_born,
    "propagator-table": prepare_propagator_table,
    "golden-rule": prepare_golden_rule,
    "coherent-state": prepare_coherent_state,
    "factorization-check": prepare_factorization_check,
}


def _emit(output_path: str, text: str) -> None:
    if output_path == STDOUT:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        path = Path(output_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        logger.info(f"Wrote {path}")


def _open_cache(config: RunConfig) -> Optional[ResultCache]:
    if config.cache_dir is None:
        return None
    try:
        return ResultCache(config.cache_dir)
    except OSError as e:
        logger.warning(f"Result cache unavailable, continuing without it: {e}")
        return None


def run(config: RunConfig) -> int:
    """
    Execute one subcommand and write its document.

    Args:
        config: Run options.

    Returns:
        Exit status: 0 on success, 1 when an error object was written.
    """
    cache = _open_cache(config)
    key = None
    cache_hit = False

    try:
        computation = PREPARERS[config.subcommand](config)
        key = result_key(config.subcommand, computation.inputs)

        cached = cache.get(key) if cache else None
        if cached is not None:
            cache_hit = True
            results, rows = cached["results"], cached["rows"]
        else:
            results, rows = computation.compute()
            rows = [flatten_complex_columns(row) for row in rows]
            if cache:
                cache.set(key, config.subcommand, {"results": to_jsonable(results), "rows": to_jsonable(rows)})

        if config.format == "csv":
            text = format_csv(rows)
        else:
            document = build_result_document(
                config.subcommand,
                computation.inputs,
                results,
                seed=computation.seed,
                warnings=computation.warnings,
                deterministic=config.deterministic,
            )
            text = format_json(document)
        exit_code = 0

    except SimulationError as e:
        logger.error(f"{config.subcommand} failed: [{e.code.value}] {e.message}")
        text = format_json(build_error_document(e))
        exit_code = 1
    except Exception as e:
        logger.error(f"{config.subcommand} failed unexpectedly: {e}", exc_info=logger.isEnabledFor(logging.DEBUG))
        error = InternalError(str(e) or type(e).__name__, {"type": type(e).__name__})
        text = format_json(build_error_document(error))
        exit_code = 1

    _emit(config.output_path, text)
    if cache:
        cache.log_run(config.subcommand, key, cache_hit, exit_code)
    return exit_code


def manage_cache(
    cache_dir: Path,
    output_path: str = STDOUT,
    clear: bool = False,
    delete: Optional[str] = None,
    history: int = 10,
) -> int:
    """
    Report archive statistics and recent runs, optionally clearing entries first.

    Args:
        cache_dir: Archive directory.
        output_path: Where to write the report ("-" for stdout).
        clear: Remove every archived result before reporting.
        delete: Key of a single result to remove before reporting.
        history: Number of recent runs to list.

    Returns:
        Exit code (0 success, 1 archive unavailable).
    """
    try:
        cache = ResultCache(cache_dir)
    except OSError as e:
        error = SimulationError(
            "Result cache unavailable", {"cache_dir": str(cache_dir), "reason": str(e)}
        )
        _emit(output_path, format_json(build_error_document(error)))
        return 1

    document: Dict[str, Any] = {
        "subcommand": CACHE_SUBCOMMAND,
        "version": LIBRARY_VERSION,
        "cache_dir": str(cache_dir),
    }
    if clear:
        document["cleared"] = cache.clear_all()
    if delete is not None:
        document["deleted"] = cache.delete(delete)
    document["stats"] = cache.get_stats()
    document["history"] = cache.get_run_history(limit=history)

    _emit(output_path, format_json(document))
    return 0


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose errors raise UsageError instead of exiting."""

    def error(self, message: str):
        raise UsageError(message, {"usage": self.format_usage().strip()})


def build_parser() -> argparse.ArgumentParser:
    """Build the argparse surface: one subparser per subcommand sharing the global flags."""
    common = _Parser(add_help=False)

    source = common.add_mutually_exclusive_group()
    source.add_argument("--scenario", type=Path, metavar="PATH", help="Scenario JSON file")
    source.add_argument("--preset", type=str, metavar="NAME", help="Bundled scenario preset")

    common.add_argument("--out", default=STDOUT, metavar="PATH", help="Output path (default: stdout)")
    common.add_argument("--format", choices=FORMATS, default="json", help="Output format (default: json)")
    common.add_argument(
        "--deterministic",
        action="store_true",
        help="Omit the timestamp so repeated runs are byte-identical",
    )
    common.add_argument(
        "--workers",
        type=int,
        default=DEFAULT_WORKERS,
        help=f"Worker threads for Monte Carlo runs (default: {DEFAULT_WORKERS})",
    )
    common.add_argument(
        "--cache-dir",
        type=Path,
        default=Path(DEFAULT_CACHE_DIR) if DEFAULT_CACHE_DIR else None,
        metavar="DIR",
        help="Archive results in a SQLite cache in DIR",
    )
    common.add_argument("--no-cache", action="store_true", help="Disable the result cache")
    common.add_argument("--debug", action="store_true", help="Enable debug output")

    parser = _Parser(
        description="Simulate transactional measurement and check its numerical identities",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    parser.add_argument("--version", action="version", version=f"Transaction Simulator {LIBRARY_VERSION}")
    subparsers = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")

    subparsers.add_parser(
        "run-transactions", parents=[common], help="Run the seeded trials of a scenario"
    )
    subparsers.add_parser(
        "check-born", parents=[common], help="Compare trial frequencies with Born weights"
    )

    table = subparsers.add_parser(
        "propagator-table", parents=[common], help="Tabulate propagators over a grid"
    )
    table.add_argument("--k0", type=float, nargs="+", required=True, help="Frequency values")
    table.add_argument("--kabs", type=float, nargs="+", required=True, help="|k| values")
    table.add_argument("--eps", type=float, nargs="+", required=True, help="Regulator values (> 0)")

    golden = subparsers.add_parser(
        "golden-rule", parents=[common], help="Integrate the squared time kernel over detuning"
    )
    golden.add_argument("--t", type=float, required=True, help="Elapsed time (> 0)")

    coherent = subparsers.add_parser(
        "coherent-state", parents=[common], help="Coherent vs number-state photon statistics"
    )
    coherent.add_argument("--alpha-re", type=float, default=0.0, help="Re(alpha)")
    coherent.add_argument("--alpha-im", type=float, default=0.0, help="Im(alpha)")
    coherent.add_argument("--nmax", type=int, default=32, help="Fock truncation (default: 32)")

    factorization = subparsers.add_parser(
        "factorization-check",
        parents=[common],
        help="Compare the vacuum two-point function with its one-photon mode sum",
    )
    factorization.add_argument("--modes", type=int, default=4, help="Random modes (default: 4)")
    factorization.add_argument("--pairs", type=int, default=10, help="Random (x, y) pairs (default: 10)")
    factorization.add_argument("--seed", type=int, default=0, help="Seed for modes and points")
    factorization.add_argument("--volume", type=float, default=1.0, help="Quantization volume")
    factorization.add_argument(
        "--component", type=int, choices=(0, 1, 2), default=0, help="Field component"
    )

    maintenance = subparsers.add_parser(
        CACHE_SUBCOMMAND, help="Show result archive statistics and recent runs, or clear it"
    )
    maintenance.add_argument(
        "--cache-dir",
        type=Path,
        default=Path(DEFAULT_CACHE_DIR) if DEFAULT_CACHE_DIR else None,
        metavar="DIR",
        help="Archive directory (default: TRANSACTION_SIM_CACHE_DIR)",
    )
    maintenance.add_argument("--out", default=STDOUT, metavar="PATH", help="Output path (default: stdout)")
    action = maintenance.add_mutually_exclusive_group()
    action.add_argument("--clear", action="store_true", help="Remove every archived result first")
    action.add_argument("--delete", metavar="KEY", help="Remove one archived result first")
    maintenance.add_argument("--history", type=int, default=10, help="Recent runs to list (default: 10)")
    maintenance.add_argument("--debug", action="store_true", help="Enable debug output")

    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Translate parsed arguments into a RunConfig."""
    params = {
        name: value
        for name, value in vars(args).items()
        if name in ("k0", "kabs", "eps", "t", "alpha_re", "alpha_im", "nmax",
                    "modes", "pairs", "seed", "volume", "component")
    }
    return RunConfig(
        subcommand=args.subcommand,
        scenario_path=args.scenario,
        preset=args.preset,
        output_path=args.out,
        format=args.format,
        deterministic=args.deterministic,
        workers=args.workers,
        cache_dir=None if args.no_cache else args.cache_dir,
        params=params,
    )


def _usage_output_path(argv: Sequence[str]) -> str:
    """Best-effort --out from a command line that failed to parse; stdout otherwise."""
    scout = _Parser(add_help=False)
    scout.add_argument("--out", default=STDOUT)
    try:
        known, _ = scout.parse_known_args(argv)
    except UsageError:
        return STDOUT
    return known.out


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI entry point."""
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.subcommand == CACHE_SUBCOMMAND:
            if args.cache_dir is None:
                parser.error("cache requires --cache-dir or TRANSACTION_SIM_CACHE_DIR")
            if args.history < 0:
                parser.error("--history must be non-negative")
        else:
            if args.subcommand in SCENARIO_SUBCOMMANDS and not (args.scenario or args.preset):
                parser.error(f"{args.subcommand} requires --scenario or --preset")
            if args.workers < 1:
                parser.error("--workers must be at least 1")
    except UsageError as e:
        sys.stderr.write(f"{e.context['usage']}\n{parser.prog}: error: {e.message}\n")
        _emit(_usage_output_path(argv), format_json(build_error_document(e)))
        return 2
    except SystemExit as e:
        return int(e.code or 0)

    if args.debug:
        logging.getLogger("transaction_sim").setLevel(logging.DEBUG)

    if args.subcommand == CACHE_SUBCOMMAND:
        return manage_cache(args.cache_dir, args.out, args.clear, args.delete, args.history)
    return run(config_from_args(args))


if __name__ == "__main__":
    sys.exit(main())
