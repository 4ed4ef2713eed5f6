"""
Scenario engine for the transactional measurement pipeline.

An emitter sends an offer wave whose components reach a set of absorbers.
Each absorber reached by a nonzero component may answer with a confirmation;
the confirmations form an incipient mixture of weighted projectors, and a
single categorical draw selects the one absorber that receives the photon.
Trials are independent, seeded per trial, and aggregated into statistics
that check the Born rule.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from typing_extensions import Self

from hilbert import (
    MODE_BASIS,
    DensityOperator,
    FieldMode,
    Operator,
    StateVector,
    inner_product,
    mixture_entropy,
    projector,
    purity,
)
from perturbation import CouplingContext, TwoLevelAtom
from utils import (
    DEFAULT_CHUNK_SIZE,
    DEFAULT_WORKERS,
    FINE_STRUCTURE,
    MAX_SEED,
    STRUCTURAL_TOL,
    NormalizationError,
    SimulationError,
    logger,
    sanitize_identifier,
    validate_probability,
)


# Chi-square bins need at least this many expected counts
MIN_EXPECTED_COUNT = 5.0

# Trials sharing one Philox counter block
TRIAL_BLOCK = 1024


class AbsorberState(Enum):
    GROUND = "ground"
    EXCITED = "excited"


class ResponseKind(Enum):
    ALWAYS = "always"
    BERNOULLI = "bernoulli"


@dataclass(frozen=True)
class Absorber:
    """
    Ground-state atom tuned to one field mode.

    Attributes:
        id: Identifier, unique within a scenario.
        mode: Mode the absorber couples to.
        state: Ground, or excited once it has won a trial.
    """
    id: str
    mode: FieldMode
    state: AbsorberState = AbsorberState.GROUND

    def __post_init__(self):
        object.__setattr__(self, "id", sanitize_identifier(self.id))
        object.__setattr__(self, "state", AbsorberState(self.state))

    def excite(self) -> "Absorber":
        """Return the absorber after receiving the photon."""
        if self.state == AbsorberState.EXCITED:
            raise SimulationError(f"Absorber {self.id} is already excited")
        return replace(self, state=AbsorberState.EXCITED)

    def to_dict(self) -> dict:
        """Convert to dictionary representation."""
        return {
            "id": self.id,
            "k_vec": [float(v) for v in self.mode.k_vec],
            "polarization": self.mode.polarization,
            "state": self.state.value,
        }


@dataclass(frozen=True)
class ResponseModel:
    """
    How absorbers decide whether to confirm.

    Attributes:
        kind: ALWAYS (every reached absorber confirms) or BERNOULLI.
        p: Per-absorber, per-trial confirmation probability (BERNOULLI only).
    """
    kind: ResponseKind = ResponseKind.ALWAYS
    p: float = FINE_STRUCTURE

    def __post_init__(self):
        object.__setattr__(self, "kind", ResponseKind(self.kind))
        object.__setattr__(self, "p", validate_probability(self.p, "p"))

    @classmethod
    def always(cls) -> Self:
        return cls(ResponseKind.ALWAYS)

    @classmethod
    def bernoulli(cls, p: float = FINE_STRUCTURE) -> Self:
        return cls(ResponseKind.BERNOULLI, p)

    def to_dict(self) -> dict:
        """Convert to dictionary representation."""
        if self.kind == ResponseKind.ALWAYS:
            return {"kind": self.kind.value}
        return {"kind": self.kind.value, "p": self.p}


@dataclass(frozen=True, eq=False)
class Scenario:
    """
    One emitter, its offer wave and the absorbers it reaches.

    Attributes:
        emitter: Excited two-level atom.
        absorbers: Absorbers, each bound to a distinct mode.
        offer_amplitudes: Offer-wave component per absorber mode.
        response_model: Confirmation model.
        trials: Number of Monte Carlo trials.
        seed: Master seed in [0, 2^64 − 1].
        coupling: Optional coupling used by emission-rate reports.
    """
    emitter: TwoLevelAtom
    absorbers: Tuple[Absorber, ...]
    offer_amplitudes: np.ndarray
    response_model: ResponseModel = field(default_factory=ResponseModel)
    trials: int = 0
    seed: int = 0
    coupling: Optional[CouplingContext] = None

    def __post_init__(self):
        absorbers = tuple(self.absorbers)
        if not absorbers:
            raise SimulationError("A scenario needs at least one absorber")

        ids = [absorber.id for absorber in absorbers]
        if len(set(ids)) != len(ids):
            raise SimulationError("Absorber ids must be distinct", {"ids": ids})
        if len({absorber.mode.signature for absorber in absorbers}) != len(absorbers):
            raise SimulationError("Each absorber must be bound to a distinct mode")
        if any(absorber.state != AbsorberState.GROUND for absorber in absorbers):
            raise SimulationError("Absorbers start every scenario in the ground state")

        amplitudes = np.array(self.offer_amplitudes, dtype=complex).reshape(-1)
        if amplitudes.size != len(absorbers):
            raise SimulationError(
                "One offer amplitude per absorber is required",
                {"amplitudes": int(amplitudes.size), "absorbers": len(absorbers)},
            )
        if not np.all(np.isfinite(amplitudes)):
            raise SimulationError("Offer amplitudes must be finite")
        norm_squared = float(np.sum(np.abs(amplitudes) ** 2))
        if abs(norm_squared - 1.0) > STRUCTURAL_TOL:
            raise NormalizationError(
                "Offer amplitudes must have unit squared norm",
                {"norm_squared": norm_squared},
            )
        amplitudes.setflags(write=False)

        if isinstance(self.trials, bool) or int(self.trials) != self.trials or self.trials < 0:
            raise SimulationError("trials must be a non-negative integer", {"trials": self.trials})
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or not 0 <= self.seed <= MAX_SEED:
            raise SimulationError("seed must be an unsigned 64-bit integer", {"seed": self.seed})

        object.__setattr__(self, "absorbers", absorbers)
        object.__setattr__(self, "offer_amplitudes", amplitudes)
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n_absorbers(self) -> int:
        return len(self.absorbers)

    @property
    def absorber_ids(self) -> List[str]:
        return [absorber.id for absorber in self.absorbers]

    @property
    def modes(self) -> List[FieldMode]:
        return [absorber.mode for absorber in self.absorbers]

    @property
    def offer_wave(self) -> StateVector:
        """The emitted state Ψ in the absorber mode basis."""
        return StateVector(self.offer_amplitudes, MODE_BASIS)

    @property
    def born_weights(self) -> np.ndarray:
        return np.abs(self.offer_amplitudes) ** 2


@dataclass(frozen=True, eq=False)
class ConfirmationSet:
    """
    Absorbers that answered the offer wave in one trial.

    Attributes:
        responder_ids: Ids of confirming absorbers, in scenario order.
        responder_indices: Their positions in the scenario.
        component_amplitudes: <k_i|Ψ> for each responder.
        dim: Number of absorbers in the scenario.
    """
    responder_ids: Tuple[str, ...]
    responder_indices: Tuple[int, ...]
    component_amplitudes: np.ndarray
    dim: int

    @property
    def is_empty(self) -> bool:
        return not self.responder_indices

    def __len__(self) -> int:
        return len(self.responder_indices)


@dataclass(frozen=True, eq=False)
class IncipientMixture:
    """
    Weighted projectors onto the responder modes.

    Attributes:
        weights: Born weights over responders, summing to 1.
        responder_indices: Responder positions in the scenario.
        responder_ids: Responder ids.
        dim: Dimension of the mode basis.
        renormalized: True when the raw weights did not already sum to 1.
    """
    weights: np.ndarray
    responder_indices: Tuple[int, ...]
    responder_ids: Tuple[str, ...]
    dim: int
    renormalized: bool = False

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if weights.size == 0 or weights.size != len(self.responder_indices):
            raise SimulationError(
                "One weight per responder is required",
                {"weights": int(weights.size), "responders": len(self.responder_indices)},
            )
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise SimulationError("Mixture weights must be finite and non-negative")
        total = float(np.sum(weights))
        if abs(total - 1.0) > STRUCTURAL_TOL:
            raise NormalizationError("Mixture weights must sum to 1", {"sum": total})
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    def kets(self) -> List[StateVector]:
        return [StateVector.basis(i, self.dim) for i in self.responder_indices]

    @property
    def projectors(self) -> List[Operator]:
        return [projector(ket) for ket in self.kets()]

    def density_operator(self) -> DensityOperator:
        """Σ w_i |k_i><k_i| as a validated density operator."""
        return DensityOperator.from_mixture(self.weights, self.kets())


@dataclass(frozen=True)
class TransactionOutcome:
    """
    Result of a completed transaction.

    Attributes:
        winner_index: Scenario position of the receiving absorber.
        winner_id: Its id.
        weight: Its weight in the mixture.
        dim: Dimension of the mode basis.
        absorbers: Absorber states after the trial (empty if not supplied).
    """
    winner_index: int
    winner_id: str
    weight: float
    dim: int
    absorbers: Tuple[Absorber, ...] = ()

    @property
    def projector(self) -> Operator:
        """The surviving projector |k_m><k_m|."""
        return projector(StateVector.basis(self.winner_index, self.dim))

    @property
    def excited_count(self) -> int:
        return sum(1 for absorber in self.absorbers if absorber.state == AbsorberState.EXCITED)


@dataclass(frozen=True)
class TrialRecord:
    """Every stage of one trial; mixture and outcome are None for a no-event trial."""
    index: int
    confirmations: ConfirmationSet
    mixture: Optional[IncipientMixture]
    outcome: Optional[TransactionOutcome]


@dataclass
class TrialStats:
    """
    Aggregated Monte Carlo results.

    Attributes:
        counts: Wins per absorber id, in scenario order.
        no_event_count: Trials in which nobody confirmed.
        trials: Number of trials run.
        expected: Expected wins per absorber from the Born weights.
        chi_square: Goodness-of-fit statistic over bins with expected >= 5.
        dof: Degrees of freedom of the chi-square test.
        p_value: Upper-tail probability of chi_square, None when dof < 1.
        seed_used: Master seed.
        mean_responders: Average confirmation-set size per trial.
        renormalized_count: Trials whose weights had to be renormalized.
    """
    counts: Dict[str, int]
    no_event_count: int
    trials: int
    expected: Dict[str, float]
    chi_square: float
    dof: int
    p_value: Optional[float]
    seed_used: int
    mean_responders: float
    renormalized_count: int

    @property
    def empirical_freq(self) -> Dict[str, float]:
        if self.trials == 0:
            return {key: 0.0 for key in self.counts}
        return {key: count / self.trials for key, count in self.counts.items()}

    @property
    def event_count(self) -> int:
        return self.trials - self.no_event_count

    def to_dict(self) -> dict:
        """Convert to dictionary representation."""
        return {
            "trials": self.trials,
            "counts": dict(self.counts),
            "no_event_count": self.no_event_count,
            "empirical_freq": self.empirical_freq,
            "expected": dict(self.expected),
            "chi_square": self.chi_square,
            "dof": self.dof,
            "p_value": self.p_value,
            "seed_used": self.seed_used,
            "mean_responders": self.mean_responders,
            "renormalized_count": self.renormalized_count,
        }


def draw_width(n_absorbers: int, response_model: ResponseModel) -> int:
    """Uniforms consumed per trial: one per absorber under BERNOULLI, then one for the winner."""
    if response_model.kind == ResponseKind.ALWAYS:
        return 1
    return n_absorbers + 1


def trial_uniforms(seed: int, start: int, stop: int, width: int) -> np.ndarray:
    """
    Uniforms in [0, 1) for trials [start, stop), one row of width per trial.

    Trials are grouped in blocks of TRIAL_BLOCK; block b is a Philox stream
    keyed by the master seed with its counter starting at b * 2^64. Row i
    therefore depends only on (seed, i, width), never on how trials are
    chunked or which thread runs them.
    """
    if start < 0 or stop < start:
        raise SimulationError("Invalid trial range", {"start": start, "stop": stop})
    if width < 1:
        raise SimulationError("width must be positive", {"width": width})

    rows = np.empty((stop - start, width))
    if stop == start:
        return rows
    for block in range(start // TRIAL_BLOCK, (stop - 1) // TRIAL_BLOCK + 1):
        first = block * TRIAL_BLOCK
        lo = max(start, first) - first
        hi = min(stop, first + TRIAL_BLOCK) - first
        generator = np.random.Generator(np.random.Philox(key=seed, counter=block << 64))
        rows[first + lo - start:first + hi - start] = generator.random((hi, width))[lo:]
    return rows


def fan_out(scenario: Scenario) -> np.ndarray:
    """Offer-wave component <k_i|Ψ> reaching each absorber."""
    psi = scenario.offer_wave
    return np.array(
        [
            inner_product(StateVector.basis(i, scenario.n_absorbers).dual(), psi)
            for i in range(scenario.n_absorbers)
        ],
        dtype=complex,
    )


def _reached(components: np.ndarray) -> np.ndarray:
    """Absorbers with a nonzero Born weight; a component whose square underflows never responds."""
    return np.abs(components) ** 2 > 0


def _draw_responders(
    reached: np.ndarray, model: ResponseModel, uniforms: Optional[np.ndarray]
) -> np.ndarray:
    """Indices of confirming absorbers. Bernoulli uses one uniform per absorber."""
    if model.kind == ResponseKind.ALWAYS:
        return np.flatnonzero(reached)
    return np.flatnonzero(reached & (uniforms < model.p))


def _draw_winner(weights: np.ndarray, uniform: float) -> int:
    """Categorical draw over normalized weights; returns a position in weights."""
    cumulative = np.cumsum(weights)
    position = int(np.searchsorted(cumulative, uniform * cumulative[-1], side="right"))
    if position >= weights.size:
        position = int(np.flatnonzero(weights > 0)[-1])
    return position


def _normalized_weights(components: np.ndarray) -> Tuple[np.ndarray, bool]:
    raw = np.abs(components) ** 2
    total = float(np.cumsum(raw)[-1])
    return raw / total, abs(total - 1.0) > STRUCTURAL_TOL


def _confirmation_set(
    components: np.ndarray, indices: np.ndarray, absorber_ids: Sequence[str]
) -> ConfirmationSet:
    return ConfirmationSet(
        responder_ids=tuple(absorber_ids[i] for i in indices),
        responder_indices=tuple(int(i) for i in indices),
        component_amplitudes=components[indices],
        dim=int(components.size),
    )


def sample_responses(
    components: Sequence[complex],
    response_model: ResponseModel,
    rng: np.random.Generator,
    absorber_ids: Optional[Sequence[str]] = None,
) -> ConfirmationSet:
    """
    Decide which absorbers confirm the offer wave.

    Absorbers whose Born weight is zero never respond. Under ALWAYS every
    other absorber responds; under BERNOULLI each responds independently
    with probability p.
    """
    components = np.asarray(components, dtype=complex)
    if absorber_ids is None:
        absorber_ids = [str(i) for i in range(components.size)]
    uniforms = None
    if response_model.kind == ResponseKind.BERNOULLI:
        uniforms = rng.random(components.size)
    indices = _draw_responders(_reached(components), response_model, uniforms)
    return _confirmation_set(components, indices, absorber_ids)


def form_mixture(confirmations: ConfirmationSet) -> Optional[IncipientMixture]:
    """
    Turn a confirmation set into the incipient mixture Σ w_i |k_i><k_i|.

    Weights are |<k_i|Ψ>|² renormalized over responders.

    Returns:
        The mixture, or None when nobody confirmed (a no-event trial).
    """
    if confirmations.is_empty:
        return None
    weights, renormalized = _normalized_weights(confirmations.component_amplitudes)
    return IncipientMixture(
        weights=weights,
        responder_indices=confirmations.responder_indices,
        responder_ids=confirmations.responder_ids,
        dim=confirmations.dim,
        renormalized=renormalized,
    )


def _actualize(
    mixture: IncipientMixture, uniform: float, absorbers: Sequence[Absorber]
) -> TransactionOutcome:
    position = _draw_winner(mixture.weights, uniform)
    winner_index = mixture.responder_indices[position]

    final_states = tuple(
        absorber.excite() if index == winner_index else absorber
        for index, absorber in enumerate(absorbers)
    )
    return TransactionOutcome(
        winner_index=winner_index,
        winner_id=mixture.responder_ids[position],
        weight=float(mixture.weights[position]),
        dim=mixture.dim,
        absorbers=final_states,
    )


def collapse(
    mixture: IncipientMixture,
    rng: np.random.Generator,
    absorbers: Sequence[Absorber] = (),
) -> TransactionOutcome:
    """
    Select the single receiving absorber with probability equal to its weight.

    When absorbers are supplied, the winner is returned excited and every
    other absorber unchanged in the ground state.
    """
    return _actualize(mixture, float(rng.random()), absorbers)


def run_trial(scenario: Scenario, trial_index: int) -> TrialRecord:
    """Run one trial through every stage of the pipeline."""
    if trial_index < 0:
        raise SimulationError("Trial index must be non-negative", {"trial_index": trial_index})
    n = scenario.n_absorbers
    model = scenario.response_model
    uniforms = trial_uniforms(scenario.seed, trial_index, trial_index + 1, draw_width(n, model))[0]

    components = fan_out(scenario)
    indices = _draw_responders(_reached(components), model, uniforms[:n])
    confirmations = _confirmation_set(components, indices, scenario.absorber_ids)
    mixture = form_mixture(confirmations)
    outcome = None
    if mixture is not None:
        outcome = _actualize(mixture, float(uniforms[-1]), scenario.absorbers)
    return TrialRecord(trial_index, confirmations, mixture, outcome)


@dataclass
class _ChunkTally:
    counts: np.ndarray
    no_event: int = 0
    responders: int = 0
    renormalized: int = 0


def _run_chunk(scenario: Scenario, components: np.ndarray, start: int, stop: int) -> _ChunkTally:
    """
    Trials [start, stop) in one vectorized pass.

    Uses the same uniforms and the same cumulative-sum arithmetic as
    run_trial, so every trial picks the same winner either way.
    """
    n = scenario.n_absorbers
    model = scenario.response_model
    uniforms = trial_uniforms(scenario.seed, start, stop, draw_width(n, model))

    raw = np.abs(components) ** 2
    reached = raw > 0
    if model.kind == ResponseKind.ALWAYS:
        mask = np.broadcast_to(reached, (stop - start, n))
    else:
        mask = reached & (uniforms[:, :n] < model.p)

    event = mask.any(axis=1)
    masked = np.where(mask[event], raw, 0.0)
    totals = np.cumsum(masked, axis=1)[:, -1]
    cumulative = np.cumsum(masked / totals[:, None], axis=1)
    targets = uniforms[event, -1] * cumulative[:, -1]
    winners = np.count_nonzero(cumulative <= targets[:, None], axis=1)

    overflow = winners >= n
    if np.any(overflow):
        winners[overflow] = n - 1 - np.argmax(masked[overflow, ::-1] > 0, axis=1)

    return _ChunkTally(
        counts=np.bincount(winners, minlength=n).astype(np.int64),
        no_event=int(np.count_nonzero(~event)),
        responders=int(np.count_nonzero(mask)),
        renormalized=int(np.count_nonzero(np.abs(totals - 1.0) > STRUCTURAL_TOL)),
    )


def _chi_square(counts: np.ndarray, expected: np.ndarray) -> Tuple[float, int, Optional[float]]:
    bins = expected >= MIN_EXPECTED_COUNT
    if not np.any(bins):
        return 0.0, 0, None
    statistic = float(np.sum((counts[bins] - expected[bins]) ** 2 / expected[bins]))
    dof = int(np.count_nonzero(bins)) - 1
    p_value = float(stats.chi2.sf(statistic, dof)) if dof >= 1 else None
    return statistic, dof, p_value


def run_trials(
    scenario: Scenario,
    workers: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> TrialStats:
    """
    Run every trial of a scenario and aggregate the outcomes.

    Trials are split into fixed chunks which may run on a thread pool; chunk
    tallies are summed, so the result is identical for any worker count.
    Expected counts are the Born weights times the number of trials with an
    event. Under the BERNOULLI model that comparison is a diagnostic only,
    since the winner is drawn from weights renormalized over a random subset.

    Args:
        scenario: Scenario to run.
        workers: Thread count (default from TRANSACTION_SIM_WORKERS).
        chunk_size: Trials per chunk (default from TRANSACTION_SIM_CHUNK_SIZE).

    Returns:
        TrialStats for the whole run.
    """
    workers = max(1, int(workers or DEFAULT_WORKERS))
    chunk_size = max(1, int(chunk_size or DEFAULT_CHUNK_SIZE))
    components = fan_out(scenario)

    chunks = [
        (start, min(start + chunk_size, scenario.trials))
        for start in range(0, scenario.trials, chunk_size)
    ]
    logger.info(
        f"Running {scenario.trials} trials over {scenario.n_absorbers} absorbers "
        f"({len(chunks)} chunks, {workers} workers)"
    )

    if workers == 1 or len(chunks) <= 1:
        tallies = [_run_chunk(scenario, components, start, stop) for start, stop in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            tallies = list(
                pool.map(lambda bounds: _run_chunk(scenario, components, *bounds), chunks)
            )

    counts = np.zeros(scenario.n_absorbers, dtype=np.int64)
    no_event = responders = renormalized = 0
    for tally in tallies:
        counts += tally.counts
        no_event += tally.no_event
        responders += tally.responders
        renormalized += tally.renormalized

    event_count = scenario.trials - no_event
    expected = scenario.born_weights * event_count
    chi_square, dof, p_value = _chi_square(counts, expected)

    ids = scenario.absorber_ids
    stats_result = TrialStats(
        counts={absorber_id: int(c) for absorber_id, c in zip(ids, counts)},
        no_event_count=no_event,
        trials=scenario.trials,
        expected={absorber_id: float(e) for absorber_id, e in zip(ids, expected)},
        chi_square=chi_square,
        dof=dof,
        p_value=p_value,
        seed_used=scenario.seed,
        mean_responders=responders / scenario.trials if scenario.trials else 0.0,
        renormalized_count=renormalized,
    )
    logger.info(
        f"Completed {scenario.trials} trials: {event_count} events, chi-square {chi_square:.4g}"
    )
    return stats_result


@dataclass(frozen=True)
class NonunitarityTrace:
    """
    Purity and entropy across one trial: offer wave, mixture, outcome.

    degenerate is set when fewer than two absorbers confirmed, in which case
    no mixed stage exists and the trace is (1, 1, 1).
    """
    purity_before: float
    purity_mixture: float
    purity_after: float
    entropy_before: float
    entropy_mixture: float
    entropy_after: float
    n_responders: int
    degenerate: bool

    @property
    def purities(self) -> Tuple[float, float, float]:
        return self.purity_before, self.purity_mixture, self.purity_after

    @property
    def entropies(self) -> Tuple[float, float, float]:
        return self.entropy_before, self.entropy_mixture, self.entropy_after

    def to_dict(self) -> dict:
        """Convert to dictionary representation."""
        return {
            "purity_before": self.purity_before,
            "purity_mixture": self.purity_mixture,
            "purity_after": self.purity_after,
            "entropy_before": self.entropy_before,
            "entropy_mixture": self.entropy_mixture,
            "entropy_after": self.entropy_after,
            "n_responders": self.n_responders,
            "degenerate": self.degenerate,
        }


def nonunitarity_trace(scenario: Scenario, trial_index: int = 0) -> NonunitarityTrace:
    """
    Follow purity through one trial: pure offer wave, mixed incipient
    state, pure actualized projector.
    """
    record = run_trial(scenario, trial_index)
    n_responders = len(record.confirmations)

    if record.mixture is None or n_responders < 2:
        logger.warning(
            f"Trial {trial_index} has {n_responders} responder(s); nonunitarity trace is degenerate"
        )
        return NonunitarityTrace(1.0, 1.0, 1.0, 0.0, 0.0, 0.0, n_responders, True)

    before = DensityOperator.from_pure(scenario.offer_wave)
    mixed = record.mixture.density_operator()
    after = DensityOperator(record.outcome.projector.entries)

    return NonunitarityTrace(
        purity_before=purity(before),
        purity_mixture=purity(mixed),
        purity_after=purity(after),
        entropy_before=mixture_entropy(before),
        entropy_mixture=mixture_entropy(mixed),
        entropy_after=mixture_entropy(after),
        n_responders=n_responders,
        degenerate=False,
    )


def any_response_probability(n_absorbers: int, p: float) -> float:
    """Probability that at least one of n independent absorbers confirms."""
    return -math.expm1(n_absorbers * math.log1p(-p)) if p < 1 else 1.0


def expected_responders(n_absorbers: int, p: float) -> Tuple[float, float]:
    """Mean and standard deviation of the number of responders per trial."""
    return n_absorbers * p, math.sqrt(n_absorbers * p * (1 - p))
