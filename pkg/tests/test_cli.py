"""
Unit tests for the command-line interface.
"""

import csv
import io
import json
import math
import sys
from pathlib import Path
from unittest.mock import patch

import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from cli import RunConfig, build_parser, config_from_args, main, run
from documents import parse_scenario
from utils import FINE_STRUCTURE, LIBRARY_VERSION, SimulationError


def run_cli(tmp_path, *argv, name="out.json"):
    """Run the CLI writing to a file; returns (exit code, output text)."""
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out.read_text(encoding="utf-8")


def run_json(tmp_path, *argv):
    code, text = run_cli(tmp_path, *argv)
    return code, json.loads(text)


class TestGoldenRule:
    """Tests for the golden-rule subcommand."""

    def test_t_50(self, tmp_path):
        """Test that the integral approaches 2πt."""
        code, document = run_json(tmp_path, "golden-rule", "--t", "50", "--deterministic")

        assert code == 0
        results = document["results"]
        assert results["integral"] == pytest.approx(314.159, rel=1e-3)
        assert results["expected"] == pytest.approx(100 * math.pi, rel=1e-12)
        assert results["rel_err"] < 1e-3
        assert document["subcommand"] == "golden-rule"
        assert document["version"] == LIBRARY_VERSION
        assert document["inputs"] == {"t": 50.0}
        assert "generated_at" not in document

    def test_timestamp_without_deterministic(self, tmp_path):
        """Test that a timestamp is written by default."""
        _, document = run_json(tmp_path, "golden-rule", "--t", "1")
        assert "generated_at" in document

    def test_zero_time_is_error(self, tmp_path):
        """Test that t = 0 produces an error object."""
        code, document = run_json(tmp_path, "golden-rule", "--t", "0")

        assert code == 1
        assert document["error"]["code"] == "invalid_argument"
        assert set(document["error"]) == {"code", "message", "context"}

    def test_decay_rates_from_preset(self, tmp_path):
        """Test per-mode decay rates when the scenario carries a coupling."""
        code, document = run_json(
            tmp_path, "golden-rule", "--t", "50", "--preset", "born_three_way", "--deterministic"
        )

        assert code == 0
        rates = document["results"]["decay_rates"]
        assert set(rates) == {"A", "B", "C"}
        for entry in rates.values():
            assert entry["rate"] == pytest.approx(entry["golden_rule_rate"], rel=1e-3)
        assert "scenario" in document["inputs"]


class TestPropagatorTable:
    """Tests for the propagator-table subcommand."""

    def test_csv_row(self, tmp_path):
        """Test the CSV row at k0 = 2, |k| = 0, ε = 0.1."""
        code, text = run_cli(
            tmp_path, "propagator-table", "--k0", "2", "--kabs", "0", "--eps", "0.1", "--format", "csv",
            name="table.csv",
        )

        assert code == 0
        rows = list(csv.DictReader(io.StringIO(text)))
        assert len(rows) == 1

        expected = 1.0 / complex(4.0, 0.1)
        row = rows[0]
        assert float(row["d_feynman_re"]) == pytest.approx(expected.real, rel=1e-12)
        assert float(row["d_feynman_im"]) == pytest.approx(expected.imag, rel=1e-12)
        assert float(row["k_squared"]) == 4.0
        assert float(row["reassembly_error"]) <= 1e-15

    def test_grid_is_cartesian(self, tmp_path):
        """Test that the table covers every (k0, |k|, ε) combination."""
        code, text = run_cli(
            tmp_path, "propagator-table", "--k0", "1", "2", "--kabs", "0.5", "--eps", "0.1", "0.01",
            "--format", "csv", name="table.csv",
        )

        assert code == 0
        rows = list(csv.DictReader(io.StringIO(text)))
        assert [(row["k0"], row["epsilon"]) for row in rows] == [
            ("1", "0.10000000000000001"),
            ("1", "0.01"),
            ("2", "0.10000000000000001"),
            ("2", "0.01"),
        ]

    def test_json_rows(self, tmp_path):
        """Test the JSON form of the table."""
        code, document = run_json(tmp_path, "propagator-table", "--k0", "2", "--kabs", "0", "--eps", "0.1")

        assert code == 0
        row = document["results"]["rows"][0]
        re, im = row["d_feynman"]
        assert complex(re, im) == pytest.approx(1.0 / complex(4.0, 0.1))
        assert document["seed"] is None

    def test_nonpositive_epsilon(self, tmp_path):
        """Test that ε <= 0 produces an error object."""
        code, document = run_json(tmp_path, "propagator-table", "--k0", "2", "--kabs", "0", "--eps", "0")

        assert code == 1
        assert document["error"]["code"] == "invalid_argument"


class TestCheckBorn:
    """Tests for the check-born subcommand."""

    def test_three_way_preset(self, tmp_path):
        """Test Born-rule reproduction over 10^5 trials."""
        code, document = run_json(
            tmp_path, "check-born", "--preset", "born_three_way", "--workers", "8", "--deterministic"
        )

        assert code == 0
        results = document["results"]
        assert results["trials"] == 100000
        assert results["dof"] == 2
        assert results["chi_square"] < 13.82
        assert results["critical_value"] == pytest.approx(13.8155, abs=1e-3)
        assert results["passed"] is True
        assert results["weights"] == pytest.approx({"A": 0.5, "B": 0.25, "C": 0.25})

        for absorber_id, weight in results["weights"].items():
            sigma = math.sqrt(weight * (1 - weight) / 100000)
            assert abs(results["empirical_freq"][absorber_id] - weight) <= 3 * sigma

    def test_csv_rows(self, tmp_path):
        """Test one CSV row per absorber."""
        code, text = run_cli(
            tmp_path, "check-born", "--preset", "two_way_equal", "--format", "csv", name="born.csv"
        )

        assert code == 0
        rows = list(csv.DictReader(io.StringIO(text)))
        assert [row["id"] for row in rows] == ["left", "right"]
        assert sum(int(row["count"]) for row in rows) == 10000

    def test_zero_trials_is_error(self, tmp_path):
        """Test that a scenario without trials cannot be checked."""
        preset = json.loads(
            (Path(__file__).parent.parent / "data" / "scenarios" / "two_way_equal.json").read_text()
        )
        preset["trials"] = 0
        scenario = tmp_path / "scenario.json"
        scenario.write_text(json.dumps(preset))

        code, document = run_json(tmp_path, "check-born", "--scenario", str(scenario))
        assert code == 1
        assert document["error"]["code"] == "invalid_argument"


class TestRunTransactions:
    """Tests for the run-transactions subcommand."""

    def test_two_way(self, tmp_path):
        """Test a two-absorber run and its echoed scenario."""
        code, document = run_json(tmp_path, "run-transactions", "--preset", "two_way_equal", "--deterministic")

        assert code == 0
        results = document["results"]
        assert results["trials"] == 10000
        assert results["no_event_count"] == 0
        assert sum(results["counts"].values()) == 10000
        assert results["seed_used"] == 7
        assert document["seed"] == 7
        assert results["nonunitarity"]["purity_mixture"] == pytest.approx(0.5, abs=1e-12)

    def test_echo_round_trip(self, tmp_path):
        """Test that the echoed scenario re-parses to the same echo."""
        _, document = run_json(tmp_path, "run-transactions", "--preset", "born_three_way", "--deterministic")
        echoed = document["inputs"]["scenario"]

        from documents import scenario_to_document

        assert scenario_to_document(parse_scenario(json.dumps(echoed))) == echoed

    def test_fine_structure_statistics(self, tmp_path):
        """Test responder statistics of the 1000-absorber bernoulli preset."""
        code, document = run_json(
            tmp_path, "run-transactions", "--preset", "fine_structure_1000", "--workers", "4", "--deterministic"
        )

        assert code == 0
        results = document["results"]
        trials = results["trials"]
        mean, sigma = results["expected_responders"]["mean"], results["expected_responders"]["sigma"]

        assert mean == pytest.approx(1000 * FINE_STRUCTURE)
        assert abs(results["mean_responders"] - mean) <= 3 * sigma / math.sqrt(trials)

        q = (1 - FINE_STRUCTURE) ** 1000
        assert q == pytest.approx(6.59e-4, rel=1e-2)
        band = 3 * math.sqrt(q * (1 - q) / trials)
        assert abs(results["no_event_count"] / trials - q) <= band
        assert results["any_response_probability"] == pytest.approx(1 - q)

    def test_missing_scenario_file(self, tmp_path):
        """Test that an unreadable scenario is an error object."""
        code, document = run_json(tmp_path, "run-transactions", "--scenario", str(tmp_path / "missing.json"))

        assert code == 1
        assert document["error"]["code"] == "scenario_parse_error"

    def test_malformed_scenario_file(self, tmp_path):
        """Test that malformed JSON reports a byte offset."""
        scenario = tmp_path / "bad.json"
        scenario.write_bytes(b'{"seed": }')

        code, document = run_json(tmp_path, "run-transactions", "--scenario", str(scenario))

        assert code == 1
        assert document["error"]["code"] == "scenario_parse_error"
        assert document["error"]["context"]["byte_offset"] == 9

    def test_schema_violation(self, tmp_path):
        """Test that a schema violation reports its field path."""
        preset = json.loads(
            (Path(__file__).parent.parent / "data" / "scenarios" / "two_way_equal.json").read_text()
        )
        del preset["seed"]
        scenario = tmp_path / "scenario.json"
        scenario.write_text(json.dumps(preset))

        code, document = run_json(tmp_path, "run-transactions", "--scenario", str(scenario))

        assert code == 1
        assert document["error"]["code"] == "scenario_schema_error"
        assert document["error"]["context"]["path"] == "seed"


class TestDeterminism:
    """Tests for byte-identical output."""

    @pytest.mark.parametrize("subcommand", ["run-transactions", "check-born"])
    def test_workers_do_not_change_output(self, tmp_path, subcommand):
        """Test that 1 and 8 worker threads give byte-identical documents."""
        args = [subcommand, "--preset", "two_way_equal", "--deterministic"]
        code_one, one = run_cli(tmp_path, *args, "--workers", "1", name="one.json")
        code_eight, eight = run_cli(tmp_path, *args, "--workers", "8", name="eight.json")

        assert code_one == code_eight == 0
        assert one == eight

    def test_bernoulli_workers_do_not_change_output(self, tmp_path):
        """Test determinism when absorbers respond at random."""
        args = ["run-transactions", "--preset", "fine_structure_1000", "--deterministic"]
        _, one = run_cli(tmp_path, *args, "--workers", "1", name="one.json")
        _, eight = run_cli(tmp_path, *args, "--workers", "8", name="eight.json")

        assert one == eight

    def test_repeated_run_identical(self, tmp_path):
        """Test that a repeated deterministic run is byte-identical."""
        args = ["factorization-check", "--modes", "4", "--pairs", "3", "--seed", "11", "--deterministic"]
        _, first = run_cli(tmp_path, *args, name="first.json")
        _, second = run_cli(tmp_path, *args, name="second.json")

        assert first == second


class TestCoherentState:
    """Tests for the coherent-state subcommand."""

    def test_alpha_two(self, tmp_path):
        """Test Poisson statistics of |α=2> against the number state |4>."""
        code, document = run_json(tmp_path, "coherent-state", "--alpha-re", "2", "--nmax", "32")

        assert code == 0
        coherent = document["results"]["coherent"]
        fock = document["results"]["fock"]
        assert coherent["mean"] == pytest.approx(4.0, abs=1e-6)
        assert coherent["variance"] == pytest.approx(4.0, abs=1e-6)
        assert coherent["mean_field"] == pytest.approx([2.0, 0.0], abs=1e-6)
        assert fock["n"] == 4
        assert fock["variance"] == 0.0
        assert fock["mean_field"] == [0.0, 0.0]

    def test_distribution_csv(self, tmp_path):
        """Test the photon-number table."""
        code, text = run_cli(
            tmp_path, "coherent-state", "--alpha-re", "1", "--nmax", "8", "--format", "csv", name="dist.csv"
        )

        assert code == 0
        rows = list(csv.DictReader(io.StringIO(text)))
        assert len(rows) == 9
        assert sum(float(row["p_coherent"]) for row in rows) == pytest.approx(1.0)
        assert float(rows[1]["p_fock"]) == 1.0

    def test_truncation_error(self, tmp_path):
        """Test that an inadequate truncation reports the tail mass."""
        code, document = run_json(tmp_path, "coherent-state", "--alpha-re", "5", "--nmax", "32")

        assert code == 1
        assert document["error"]["code"] == "truncation_inadequate"
        assert document["error"]["context"]["tail_mass"] > 0


class TestFactorizationCheck:
    """Tests for the factorization-check subcommand."""

    @pytest.mark.parametrize("modes", [1, 4, 16])
    def test_identity_holds(self, tmp_path, modes):
        """Test direct and mode-sum two-point functions agree."""
        code, document = run_json(
            tmp_path, "factorization-check", "--modes", str(modes), "--pairs", "10", "--seed", "3"
        )

        assert code == 0
        results = document["results"]
        assert results["n_modes"] == modes
        assert len(results["pairs"]) == 10
        assert results["max_abs_deviation"] <= 1e-12
        assert document["seed"] == 3

    def test_scenario_modes(self, tmp_path):
        """Test using the modes and volume of a scenario."""
        code, document = run_json(tmp_path, "factorization-check", "--preset", "born_three_way")

        assert code == 0
        assert document["results"]["n_modes"] == 3
        assert document["inputs"]["volume"] == 1000.0


class TestErrorsAndUsage:
    """Tests for exit codes and error objects."""

    def assert_usage_error(self, tmp_path, *argv):
        """Run argv and check for exit code 2 with a usage error object."""
        code, document = run_json(tmp_path, *argv)

        assert code == 2
        assert document["error"]["code"] == "usage_error"
        assert document["error"]["message"]
        assert "usage:" in document["error"]["context"]["usage"]
        assert document["version"] == LIBRARY_VERSION
        return document

    def test_no_subcommand(self, tmp_path):
        """Test that a missing subcommand is a usage error."""
        self.assert_usage_error(tmp_path)

    def test_scenario_required(self, tmp_path):
        """Test that Monte Carlo subcommands need a scenario."""
        document = self.assert_usage_error(tmp_path, "check-born")
        assert "--scenario or --preset" in document["error"]["message"]

    def test_bad_format(self, tmp_path):
        """Test that an unknown format is a usage error."""
        document = self.assert_usage_error(tmp_path, "golden-rule", "--t", "1", "--format", "xml")
        assert "xml" in document["error"]["message"]

    def test_missing_numeric_flag(self, tmp_path):
        """Test that required numeric flags are enforced."""
        self.assert_usage_error(tmp_path, "golden-rule")
        self.assert_usage_error(tmp_path, "propagator-table", "--k0", "1")

    def test_scenario_and_preset_exclusive(self, tmp_path):
        """Test that --scenario and --preset cannot be combined."""
        self.assert_usage_error(
            tmp_path, "check-born", "--scenario", "a.json", "--preset", "born_three_way"
        )

    def test_zero_workers(self, tmp_path):
        """Test that at least one worker is required."""
        document = self.assert_usage_error(
            tmp_path, "check-born", "--preset", "two_way_equal", "--workers", "0"
        )
        assert "--workers" in document["error"]["message"]

    def test_usage_error_on_stdout(self, capsys):
        """Test that usage errors go to stdout when --out is absent."""
        assert main(["golden-rule", "--t", "abc"]) == 2

        captured = capsys.readouterr()
        assert json.loads(captured.out)["error"]["code"] == "usage_error"
        assert "error:" in captured.err

    def test_version(self, capsys):
        """Test --version."""
        assert main(["--version"]) == 0
        assert LIBRARY_VERSION in capsys.readouterr().out

    def test_unknown_preset(self, tmp_path):
        """Test that an unknown preset is an error object."""
        code, document = run_json(tmp_path, "check-born", "--preset", "nope")

        assert code == 1
        assert document["error"]["code"] == "invalid_argument"

    def test_unexpected_exception(self, tmp_path):
        """Test that unexpected failures still produce an error object."""
        with patch("cli.golden_rule_report", side_effect=RuntimeError("boom")):
            code, document = run_json(tmp_path, "golden-rule", "--t", "1")

        assert code == 1
        assert document["error"]["code"] == "internal_error"
        assert document["error"]["message"] == "boom"
        assert document["error"]["context"] == {"type": "RuntimeError"}

    def test_stdout(self, capsys):
        """Test writing the document to standard output."""
        assert main(["golden-rule", "--t", "1", "--deterministic"]) == 0
        document = json.loads(capsys.readouterr().out)
        assert document["results"]["expected"] == pytest.approx(2 * math.pi)

    def test_run_config_validation(self):
        """Test RunConfig rejects unknown subcommands and formats."""
        with pytest.raises(SimulationError):
            RunConfig(subcommand="nope")
        with pytest.raises(SimulationError):
            RunConfig(subcommand="golden-rule", format="xml")


class TestResultCache:
    """Tests for the --cache-dir archive."""

    def test_cache_hit_reproduces_document(self, tmp_path):
        """Test that a cache hit gives the same bytes without recomputing."""
        cache_dir = tmp_path / "cache"
        args = ["golden-rule", "--t", "10", "--deterministic", "--cache-dir", str(cache_dir)]

        _, first = run_cli(tmp_path, *args, name="first.json")
        with patch("cli.golden_rule_report", side_effect=RuntimeError("recomputed")):
            code, second = run_cli(tmp_path, *args, name="second.json")

        assert code == 0
        assert first == second

    def test_cache_hit_csv(self, tmp_path):
        """Test that cached tables keep their complex columns."""
        cache_dir = tmp_path / "cache"
        args = ["propagator-table", "--k0", "2", "--kabs", "1", "--eps", "0.1",
                "--format", "csv", "--cache-dir", str(cache_dir)]

        _, first = run_cli(tmp_path, *args, name="first.csv")
        _, second = run_cli(tmp_path, *args, name="second.csv")

        assert first == second
        assert "d_feynman_re" in first.splitlines()[0]

    def test_run_history(self, tmp_path):
        """Test that every run is logged with its cache status."""
        from cache import ResultCache

        cache_dir = tmp_path / "cache"
        args = ["golden-rule", "--t", "2", "--cache-dir", str(cache_dir)]
        run_cli(tmp_path, *args)
        run_cli(tmp_path, *args)

        history = ResultCache(cache_dir).get_run_history()
        assert [entry["cache_hit"] for entry in history] == [1, 0]
        assert all(entry["exit_code"] == 0 for entry in history)

    def test_no_cache_flag(self, tmp_path):
        """Test that --no-cache disables the archive."""
        parser = build_parser()
        args = parser.parse_args(["golden-rule", "--t", "1", "--cache-dir", str(tmp_path), "--no-cache"])
        assert config_from_args(args).cache_dir is None

    def test_workers_not_echoed(self, tmp_path):
        """Test that the worker count never reaches the document."""
        config = RunConfig(
            subcommand="run-transactions",
            preset="two_way_equal",
            output_path=str(tmp_path / "out.json"),
            deterministic=True,
            workers=3,
        )
        assert run(config) == 0
        assert "workers" not in (tmp_path / "out.json").read_text()


class TestCacheSubcommand:
    """Tests for the cache maintenance subcommand."""

    def populate(self, tmp_path, cache_dir):
        """Archive two golden-rule results."""
        for t in ("1", "2"):
            run_cli(tmp_path, "golden-rule", "--t", t, "--cache-dir", str(cache_dir))

    def test_report(self, tmp_path):
        """Test statistics and recent runs are reported."""
        cache_dir = tmp_path / "cache"
        self.populate(tmp_path, cache_dir)

        code, document = run_json(tmp_path, "cache", "--cache-dir", str(cache_dir), "--history", "1")

        assert code == 0
        assert document["subcommand"] == "cache"
        assert document["version"] == LIBRARY_VERSION
        assert document["stats"]["total_entries"] == 2
        assert document["stats"]["per_subcommand"] == {"golden-rule": 2}
        assert len(document["history"]) == 1
        assert "cleared" not in document

    def test_clear(self, tmp_path):
        """Test --clear empties the archive before reporting."""
        cache_dir = tmp_path / "cache"
        self.populate(tmp_path, cache_dir)

        code, document = run_json(tmp_path, "cache", "--cache-dir", str(cache_dir), "--clear")

        assert code == 0
        assert document["cleared"] == 2
        assert document["stats"]["total_entries"] == 0
        assert len(document["history"]) == 2

    def test_delete(self, tmp_path):
        """Test --delete removes one entry by key."""
        from cache import result_key

        cache_dir = tmp_path / "cache"
        self.populate(tmp_path, cache_dir)
        key = result_key("golden-rule", {"t": 1.0})

        _, document = run_json(tmp_path, "cache", "--cache-dir", str(cache_dir), "--delete", key)
        assert document["deleted"] is True
        assert document["stats"]["total_entries"] == 1

        _, document = run_json(tmp_path, "cache", "--cache-dir", str(cache_dir), "--delete", key)
        assert document["deleted"] is False

    def test_requires_directory(self, tmp_path):
        """Test the archive directory is required."""
        with patch("cli.DEFAULT_CACHE_DIR", None):
            code, document = run_json(tmp_path, "cache")

        assert code == 2
        assert document["error"]["code"] == "usage_error"

    def test_clear_and_delete_exclusive(self, tmp_path):
        """Test --clear and --delete cannot be combined."""
        code, document = run_json(
            tmp_path, "cache", "--cache-dir", str(tmp_path / "cache"), "--clear", "--delete", "k"
        )
        assert code == 2
        assert document["error"]["code"] == "usage_error"


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
