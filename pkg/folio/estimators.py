"""Inner-product and norm estimators with sample / query accounting.

The classical estimator samples the portfolio distribution and combines the
draws by median of means. The query-model subroutines are emulated by their
error contracts: the truth is computed exactly, a bounded relative error is
injected according to a :class:`NoiseModel`, and the oracle calls the
subroutine would make are charged to a :class:`QuantumCostModel`. Big-O
constants are nominal (1) except where an explicit constant is known.
"""

from __future__ import annotations

import enum
import logging
import math
from collections import Counter
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace

import numpy as np
from numpy.typing import ArrayLike
from numpy.typing import NDArray

from .errors import EpsExceedsXMinError
from .errors import InputError
from .errors import InvalidSError
from .errors import ZTildeOutOfRangeError
from .sampler import AliasTable
from .sampler import build
from .sampler import multi_sample
from .updates import LogWeights

logger = logging.getLogger(__name__)

MOM_CONSTANT = 27.0
INNER_PRODUCT_CONSTANT = 6.0 * math.pi


# --- accounting types ---


@dataclass(frozen=True)
class EstimatorBudget:
    """Samples drawn and queries made by one classical estimate."""

    eps: float
    delta: float
    samples_used: int = 0
    queries_charged: int = 0
    stage_samples: tuple[int, ...] = ()

    def charge(self, samples: int, queries: int) -> EstimatorBudget:
        if samples < 0 or queries < 0:
            raise InputError("budget counters only grow")
        return replace(
            self,
            samples_used=self.samples_used + samples,
            queries_charged=self.queries_charged + queries,
            stage_samples=(*self.stage_samples, samples),
        )


class NoiseKind(str, enum.Enum):
    EXACT = "exact"
    WORST_CASE_SIGN = "worst_case_sign"
    UNIFORM_RANDOM = "uniform_random"


@dataclass(frozen=True)
class NoiseModel:
    """How an emulated subroutine realizes its "within ε relative" contract.

    ``magnitude`` caps the injected error; ``None`` means the full tolerance
    of the call site is used.
    """

    kind: NoiseKind = NoiseKind.EXACT
    sign: int = 1
    magnitude: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if self.sign not in (1, -1):
            raise InputError(f"sign must be +1 or -1, got {self.sign}")
        if self.magnitude is not None and not 0.0 <= self.magnitude < 0.5:
            raise InputError(f"noise magnitude must lie in [0, 1/2), got {self.magnitude}")

    @classmethod
    def parse(cls, text: str) -> NoiseModel:
        """CLI spelling: ``exact``, ``worst+``, ``worst-`` or ``random``."""
        spellings = {
            "exact": cls(),
            "worst+": cls(NoiseKind.WORST_CASE_SIGN, 1),
            "worst-": cls(NoiseKind.WORST_CASE_SIGN, -1),
            "random": cls(NoiseKind.UNIFORM_RANDOM),
        }
        try:
            return spellings[text.strip().lower()]
        except KeyError as e:
            raise InputError(f"unknown noise model {text!r}, expected one of {sorted(spellings)}") from e

    def label(self) -> str:
        if self.kind is NoiseKind.WORST_CASE_SIGN:
            return "worst+" if self.sign > 0 else "worst-"
        return "random" if self.kind is NoiseKind.UNIFORM_RANDOM else "exact"

    def perturb(self, truth: float, eps: float, rng: np.random.Generator) -> float:
        bound = eps if self.magnitude is None else min(eps, self.magnitude)
        if self.kind is NoiseKind.EXACT or bound == 0.0:
            return truth
        if self.kind is NoiseKind.WORST_CASE_SIGN:
            return truth * (1.0 + self.sign * bound)
        return truth * (1.0 + rng.uniform(-bound, bound))


@dataclass
class QuantumCostModel:
    """Oracle-call ledger for one emulated run.

    Every subroutine runs at failure probability δ/(4T), which is where the
    shared ``ln(4T/δ)`` repetition factor comes from. ``history_queries``
    additionally counts data-input queries: each call to the weight oracle
    recomputes the history sum over the days pushed so far.
    """

    n: int
    horizon: int
    r_min: float
    delta: float
    constant: float = 1.0
    calls: Counter[str] = field(default_factory=Counter)
    history_queries: int = 0
    fallbacks: int = 0

    def __post_init__(self) -> None:
        if self.n < 1 or self.horizon < 1:
            raise InputError(f"need n >= 1 and T >= 1, got n={self.n}, T={self.horizon}")
        if not 0.0 < self.delta < 1.0:
            raise InputError(f"delta must lie in (0, 1), got {self.delta}")

    @property
    def log_factor(self) -> float:
        return math.log(4.0 * self.horizon / self.delta)

    @property
    def total_queries(self) -> int:
        return sum(self.calls.values())

    def charge(self, subroutine: str, calls: int, history_length: int = 0) -> int:
        self.calls[subroutine] += calls
        self.history_queries += calls * max(1, history_length)
        return calls

    # Charge formulas; pure functions of their arguments.

    def max_find_charge(self) -> int:
        return math.ceil(self.constant * math.sqrt(self.n) * self.log_factor)

    def norm_estimate_charge(self, eps_z: float) -> int:
        if eps_z == 0.0:
            return self.n
        return math.ceil(self.constant * math.sqrt(self.n) / eps_z * self.log_factor)

    def state_prepare_charge(self) -> int:
        return math.ceil(self.constant * math.sqrt(self.n) * self.log_factor)

    def inner_product_repeat_charge(self, eps_i: float) -> int:
        return math.ceil(INNER_PRODUCT_CONSTANT * math.sqrt(self.n) / (eps_i * math.sqrt(self.r_min)))

    def inner_product_charge(self, eps_i: float) -> int:
        if eps_i == 0.0:
            return self.n
        return self.inner_product_repeat_charge(eps_i) * math.ceil(self.log_factor)

    def multi_sample_parameter_charge(self, s: int, eps: float) -> int:
        root = math.sqrt(s * self.n)
        scale = root / eps if eps > 0.0 else float(self.n)
        return math.ceil(self.constant * (root + scale) * self.log_factor)

    def multi_sample_draw_charge(self, s: int) -> int:
        return math.ceil(self.constant * math.sqrt(s * self.n) * self.log_factor)

    def direct_sample_charge(self, s: int) -> int:
        return math.ceil(self.constant * s * math.sqrt(self.n) * self.log_factor)


# --- classical estimators ---


def sample_count(horizon: int, r_min: float, delta: float) -> int:
    """s = ⌈2T (1 − r_min)² ln(T/δ)⌉, at least 1."""
    if horizon < 1 or not 0.0 < r_min <= 1.0 or not 0.0 < delta < 1.0:
        raise InputError(f"invalid arguments T={horizon}, r_min={r_min}, delta={delta}")
    return max(1, math.ceil(2.0 * horizon * (1.0 - r_min) ** 2 * math.log(horizon / delta)))


def mom_sample_count(eps: float, delta: float) -> int:
    """⌈27/ε² · ln(1/δ)⌉ samples for the median-of-means estimate."""
    return max(1, math.ceil(MOM_CONSTANT / eps**2 * math.log(1.0 / delta)))


def mom_group_count(delta: float) -> int:
    return max(1, math.ceil(math.log(1.0 / delta)))


def _check_unit_interval(name: str, value: float) -> None:
    if not 0.0 < value < 1.0:
        raise InputError(f"{name} must lie in (0, 1), got {value}")


def mom_inner_product(
    x: ArrayLike,
    p_sampler: AliasTable,
    eps: float,
    delta: float,
    rng: np.random.Generator,
) -> tuple[float, EstimatorBudget]:
    """Median-of-means estimate of ``p·x`` within ``ε√(p·x)`` w.p. at least 1 − δ/2."""
    _check_unit_interval("eps", eps)
    _check_unit_interval("delta", delta)
    values = np.asarray(x, dtype=np.float64)
    if values.shape != (p_sampler.n,):
        raise InputError(f"x has shape {values.shape}, sampler covers {p_sampler.n} outcomes")
    m = mom_sample_count(eps, delta)
    groups = min(mom_group_count(delta), m)
    draws = values[multi_sample(p_sampler, m, rng)]
    means = [float(chunk.mean()) for chunk in np.array_split(draws, groups)]
    estimate = float(np.median(means))
    return estimate, EstimatorBudget(eps, delta).charge(m, m)


def relative_inner_product(
    x: ArrayLike,
    p_sampler: AliasTable,
    eps_i: float,
    delta: float,
    rng: np.random.Generator,
    x_min: float | None = None,
) -> tuple[float, EstimatorBudget]:
    """Two-stage estimate of ``α = p·x`` to relative error ``ε_I`` w.p. at least 1 − δ.

    The first stage at ``ε = ε_I`` gives a rough ``α̃₁``; the second reruns at
    ``ε = ε_I √α̃₁ / 2``, which turns the additive guarantee into a relative one.
    """
    values = np.asarray(x, dtype=np.float64)
    floor = float(values.min()) if x_min is None else x_min
    if not floor > 0.0:
        raise InputError(f"x_min must be positive, got {floor}")
    if eps_i > floor:
        raise EpsExceedsXMinError("eps_I <= x_min", eps_I=eps_i, x_min=floor)
    rough, first = mom_inner_product(values, p_sampler, eps_i, delta, rng)
    refined_eps = eps_i * math.sqrt(rough) / 2.0
    estimate, second = mom_inner_product(values, p_sampler, refined_eps, delta, rng)
    budget = first.charge(second.samples_used, second.queries_charged)
    return estimate, budget


# --- query-model emulators ---


def q_max_find(values: ArrayLike, cost: QuantumCostModel, history_length: int = 0) -> tuple[int, float]:
    """Exact argmax (ties go to the smallest index)."""
    array = np.asarray(values, dtype=np.float64)
    if array.size < 1:
        raise InputError("cannot take the maximum of an empty vector")
    index = int(np.argmax(array))
    cost.charge("max_find", cost.max_find_charge(), history_length)
    return index, float(array[index])


def q_norm_estimate(
    q_over_qmax: ArrayLike,
    eps_z: float,
    noise: NoiseModel,
    cost: QuantumCostModel,
    rng: np.random.Generator,
    history_length: int = 0,
) -> float:
    """ℓ1 norm of a vector with entries in [0, 1] and maximum 1, within ``ε_Z`` relative."""
    v = np.asarray(q_over_qmax, dtype=np.float64)
    if v.size < 1 or np.any(v < 0) or np.any(v > 1.0 + 1e-12):
        raise InputError("norm estimation needs entries in [0, 1]")
    if not 0.0 <= eps_z < 0.5:
        raise InputError(f"eps_Z must lie in [0, 1/2), got {eps_z}")
    cost.charge("norm_estimate", cost.norm_estimate_charge(eps_z), history_length)
    return noise.perturb(float(v.sum()), eps_z, rng)


def scaled_weights(lw: LogWeights, log_q_max: float | None = None) -> NDArray[np.float64]:
    """``q / q_max`` recovered from the exponents; entries in (0, 1] with maximum 1.

    ``log_q_max`` is the largest exponent as found by ``q_max_find``; it is taken
    from the exponents when not given.
    """
    top = lw.exponents.max() if log_q_max is None else log_q_max
    return np.exp(lw.exponents - top)


def approximate_weights(lw: LogWeights, z_tilde: float, log_q_max: float | None = None) -> NDArray[np.float64]:
    """The prepared amplitudes squared, ``w̃_i = (q_i / q_max) / Z̃``, before any renormalization."""
    return scaled_weights(lw, log_q_max) / z_tilde


def q_state_prepare_sampler(
    lw: LogWeights,
    z_tilde: float,
    cost: QuantumCostModel,
    history_length: int = 0,
    log_q_max: float | None = None,
) -> AliasTable:
    """Sampler over the measurement distribution of the prepared portfolio state.

    Measurement outcomes of a physical state are normalized, so the table is
    built from ``w̃`` rescaled to sum to one; ``‖w̃ − q/‖q‖₁‖₁ ≤ 2ζ`` holds for
    the unnormalized amplitudes whenever ``Z̃`` is within ``ζ ≤ 1/2`` of the norm.
    """
    v = scaled_weights(lw, log_q_max)
    norm = float(v.sum())
    zeta = abs(z_tilde - norm) / norm
    if not z_tilde > 0.0 or zeta > 0.5:
        raise ZTildeOutOfRangeError(
            f"Z̃={z_tilde!r} is {zeta:.3g} relative from the norm {norm!r}; at most 1/2 allowed"
        )
    w_tilde = v / z_tilde
    cost.charge("state_prepare", cost.state_prepare_charge(), history_length)
    return build(w_tilde / w_tilde.sum())


def q_inner_product(
    rho: ArrayLike,
    weights: ArrayLike,
    eps_i: float,
    noise: NoiseModel,
    cost: QuantumCostModel,
    rng: np.random.Generator,
    history_length: int = 0,
) -> float:
    """``w̃·ρ`` within ``ε_I`` relative; ``weights`` are the prepared (near-simplex) amplitudes."""
    row = np.asarray(rho, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if row.shape != w.shape:
        raise InputError(f"rho has shape {row.shape}, weights have shape {w.shape}")
    if not 0.0 <= eps_i < 0.5:
        raise InputError(f"eps_I must lie in [0, 1/2), got {eps_i}")
    cost.charge("inner_product", cost.inner_product_charge(eps_i), history_length)
    return noise.perturb(float(w @ row), eps_i, rng)


def q_multi_sample(
    table: AliasTable,
    s: int,
    eps: float,
    cost: QuantumCostModel,
    rng: np.random.Generator,
    history_length: int = 0,
) -> NDArray[np.int64]:
    """``s`` i.i.d. draws; the charge depends on whether the multi-sampling regime ``1 < s < n`` applies."""
    if s < 1:
        raise InvalidSError(f"s must be >= 1, got {s}")
    if 1 < s < table.n:
        cost.charge("multi_sample_parameters", cost.multi_sample_parameter_charge(s, eps), history_length)
        cost.charge("multi_sample_draws", cost.multi_sample_draw_charge(s), history_length)
    else:
        cost.fallbacks += 1
        cost.charge("direct_sample", cost.direct_sample_charge(s), history_length)
    return multi_sample(table, s, rng)
