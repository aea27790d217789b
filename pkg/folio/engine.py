"""Run the four online algorithms over a price-relative series and account for the outcome.

Each run produces a :class:`RunReport` with the achieved normalized log
wealth, the offline benchmark, the regret against the algorithm's bound,
transaction costs and (for the emulated algorithm) oracle-call charges.
"""

from __future__ import annotations

import enum
import logging
import math
from collections.abc import Callable
from collections.abc import Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from typing import Any

import numpy as np
from numpy.typing import ArrayLike
from numpy.typing import NDArray

from .errors import DeltaOutOfRangeError
from .errors import EpsITooLargeError
from .errors import EpsZTooLargeError
from .errors import InputError
from .errors import ParameterRegimeError
from .errors import RMinViolationError
from .estimators import NoiseKind
from .estimators import NoiseModel
from .estimators import QuantumCostModel
from .estimators import approximate_weights
from .estimators import q_inner_product
from .estimators import q_max_find
from .estimators import q_multi_sample
from .estimators import q_norm_estimate
from .estimators import q_state_prepare_sampler
from .estimators import relative_inner_product
from .estimators import sample_count
from .estimators import scaled_weights
from .market import PriceRelativeSeries
from .offline import DEFAULT_MAX_ITER
from .offline import DEFAULT_TOL
from .offline import OfflineSolution
from .offline import solve_offline
from .sampler import build
from .sampler import multi_sample
from .updates import LogWeights
from .updates import Portfolio
from .updates import UpdateParams
from .updates import eeg_update
from .updates import eg_update
from .updates import erroneous_wealth_bound
from .updates import exact_normalizer
from .updates import inner_product_tolerance
from .updates import learning_rate
from .updates import log_history_push
from .updates import norm_tolerance

logger = logging.getLogger(__name__)

# Relative slack for comparing an injected estimate against its band.
_BAND_SLACK = 1e-12


class Algorithm(str, enum.Enum):
    ALG1_EG = "alg1_eg"
    ALG2_SAMPLED = "alg2_sampled"
    ALG3_APPROX = "alg3_approx"
    ALG4_QUANTUM_EMULATED = "alg4_quantum_emulated"

    @classmethod
    def parse(cls, text: str | Algorithm) -> Algorithm:
        """Accept the enum value or the CLI short name (eg, sampled, approx, quantum)."""
        if isinstance(text, Algorithm):
            return text
        short = {"eg": cls.ALG1_EG, "sampled": cls.ALG2_SAMPLED, "approx": cls.ALG3_APPROX,
                 "quantum": cls.ALG4_QUANTUM_EMULATED}
        key = text.strip().lower()
        if key in short:
            return short[key]
        try:
            return cls(key)
        except ValueError as e:
            raise InputError(f"unknown algorithm {text!r}") from e


# Regret-bound multiples of (1/r_min) √(ln n / 2T).
BOUND_CONSTANTS = {
    Algorithm.ALG1_EG: 1.0,
    Algorithm.ALG2_SAMPLED: 2.0,
    Algorithm.ALG3_APPROX: 8.0,
    Algorithm.ALG4_QUANTUM_EMULATED: 12.0,
}

# Advertised failure probability as a multiple of δ.
FAILURE_MULTIPLES = {
    Algorithm.ALG1_EG: 0,
    Algorithm.ALG2_SAMPLED: 2,
    Algorithm.ALG3_APPROX: 3,
    Algorithm.ALG4_QUANTUM_EMULATED: 3,
}


@dataclass(frozen=True)
class RunConfig:
    algorithm: Algorithm
    n: int | None = None
    horizon: int | None = None
    r_min: float | None = None
    delta: float = 0.05
    cost_per_trade: float = 0.0
    eta_override: float | None = None
    s_override: int | None = None
    eps_i_override: float | None = None
    eps_z_override: float | None = None
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0
    offline_tol: float = DEFAULT_TOL
    offline_max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self) -> None:
        object.__setattr__(self, "algorithm", Algorithm.parse(self.algorithm))
        if not 0.0 < self.delta < 1.0 / 3.0:
            raise DeltaOutOfRangeError("0 < delta < 1/3", delta=self.delta)
        if self.cost_per_trade < 0:
            raise InputError(f"cost per trade must be nonnegative, got {self.cost_per_trade}")
        if self.s_override is not None and self.s_override < 1:
            raise InputError(f"s must be >= 1, got {self.s_override}")
        if self.eta_override is not None and self.eta_override < 0:
            raise InputError(f"eta must be nonnegative, got {self.eta_override}")
        if not 0 <= self.seed < 2**64:
            raise InputError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass(frozen=True)
class StepRecord:
    t: int
    realized_factor: float
    cost: float
    portfolio: NDArray[np.float64] | None = None
    indices: NDArray[np.int64] | None = None
    i_tilde: float | None = None
    z_tilde: float | None = None
    queries: int = 0
    hoeffding_ok: bool | None = None
    estimate_ok: bool | None = None


@dataclass(frozen=True)
class RunReport:
    algorithm: Algorithm
    params: dict[str, Any]
    ls_achieved: float
    ls_star: float
    regret: float
    regret_bound: float
    bound_satisfied: bool
    total_cost: float
    total_queries: int
    steps: tuple[StepRecord, ...]
    success_events: dict[str, int]
    offline: OfflineSolution
    history_queries: int = 0

    @property
    def horizon(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class _Resolved:
    n: int
    horizon: int
    update: UpdateParams
    s: int
    cost_per_trade: float

    def as_params(self, cfg: RunConfig) -> dict[str, Any]:
        u = self.update
        return {
            "n": self.n,
            "T": self.horizon,
            "r_min": u.r_min,
            "delta": u.delta,
            "eta": u.eta,
            "eps_I": u.eps_i,
            "eps_Z": u.eps_z,
            "s": self.s,
            "cost_per_trade": self.cost_per_trade,
            "failure_probability": FAILURE_MULTIPLES[cfg.algorithm] * u.delta,
            "noise": cfg.noise.label(),
            "seed": cfg.seed,
            "constants": "nominal",
        }


def regret_bound(algorithm: Algorithm | str, n: int, horizon: int, r_min: float) -> float:
    """c / r_min · √(ln n / 2T) with c = 1, 2, 8, 12 for the four algorithms."""
    constant = BOUND_CONSTANTS[Algorithm.parse(algorithm)]
    return constant / r_min * math.sqrt(math.log(n) / (2.0 * horizon))


def wealth_factor(report: RunReport) -> float:
    """S = exp(T · LS), the compounded growth of one unit of wealth."""
    return math.exp(report.horizon * report.ls_achieved)


def _resolve(rel: PriceRelativeSeries, cfg: RunConfig) -> _Resolved:
    if cfg.n is not None and cfg.n != rel.n:
        raise InputError(f"config says n={cfg.n} but the market has {rel.n} assets")
    if cfg.horizon is not None and cfg.horizon != rel.horizon:
        raise InputError(f"config says T={cfg.horizon} but the market has {rel.horizon} days")
    r_min = rel.r_min if cfg.r_min is None else cfg.r_min
    if not 0.0 < r_min <= rel.r_min:
        raise RMinViolationError(f"r_min={r_min} is not a lower bound for this market (observed {rel.r_min})")
    eta = learning_rate(rel.n, rel.horizon, r_min) if cfg.eta_override is None else cfg.eta_override
    eps_i = inner_product_tolerance(eta, r_min) if cfg.eps_i_override is None else cfg.eps_i_override
    eps_z = norm_tolerance(eta, r_min) if cfg.eps_z_override is None else cfg.eps_z_override
    s = sample_count(rel.horizon, r_min, cfg.delta) if cfg.s_override is None else cfg.s_override
    update = UpdateParams(eta, eps_i, eps_z, cfg.delta, r_min)
    return _Resolved(rel.n, rel.horizon, update, s, cfg.cost_per_trade)


def _require_regime(p: _Resolved, cfg: RunConfig, with_norm: bool) -> None:
    try:
        p.update.require_inner_product_regime()
        if with_norm:
            p.update.require_norm_regime()
    except ParameterRegimeError as e:
        logger.warning("Refusing %s at n=%d T=%d: %s", cfg.algorithm.value, p.n, p.horizon, e)
        raise


def _hoeffding_ok(factor: float, expected: float, horizon: int) -> bool:
    return abs(factor - expected) < math.sqrt(1.0 / (2.0 * horizon))


def _within_band(estimate: float, truth: float, eps: float) -> bool:
    return abs(estimate - truth) <= eps * truth * (1.0 + _BAND_SLACK) + _BAND_SLACK * truth


def _finish(
    rel: PriceRelativeSeries,
    cfg: RunConfig,
    p: _Resolved,
    steps: list[StepRecord],
    total_cost: float,
    total_queries: int = 0,
    history_queries: int = 0,
    extra_events: dict[str, int] | None = None,
) -> RunReport:
    ls_achieved = math.fsum(math.log(step.realized_factor) for step in steps) / p.horizon
    offline = solve_offline(rel, cfg.offline_tol, cfg.offline_max_iter)
    regret = offline.ls_star - ls_achieved
    bound = regret_bound(cfg.algorithm, p.n, p.horizon, p.update.r_min)
    slack = 10.0 * cfg.offline_tol + offline.gradient_residual
    events = {"steps": len(steps)}
    if any(step.hoeffding_ok is not None for step in steps):
        events["hoeffding_ok"] = sum(1 for step in steps if step.hoeffding_ok)
    if any(step.estimate_ok is not None for step in steps):
        events["estimate_ok"] = sum(1 for step in steps if step.estimate_ok)
    events.update(extra_events or {})
    report = RunReport(
        algorithm=cfg.algorithm,
        params=p.as_params(cfg),
        ls_achieved=ls_achieved,
        ls_star=offline.ls_star,
        regret=regret,
        regret_bound=bound,
        bound_satisfied=regret <= bound + slack,
        total_cost=total_cost,
        total_queries=total_queries,
        steps=tuple(steps),
        success_events=events,
        offline=offline,
        history_queries=history_queries,
    )
    logger.info(
        "%s finished: LS=%.6g LS*=%.6g regret=%.6g bound=%.6g satisfied=%s",
        cfg.algorithm.value, ls_achieved, offline.ls_star, regret, bound, report.bound_satisfied,
    )
    return report


def _expect(cfg: RunConfig, algorithm: Algorithm) -> None:
    if cfg.algorithm is not algorithm:
        raise InputError(f"config is for {cfg.algorithm.value}, not {algorithm.value}")


def run_alg1(rel: PriceRelativeSeries, cfg: RunConfig) -> RunReport:
    """Invest in every asset according to the exact exponentiated-gradient portfolio."""
    _expect(cfg, Algorithm.ALG1_EG)
    p = _resolve(rel, cfg)
    logger.info("Running %s: n=%d T=%d eta=%.6g", cfg.algorithm.value, p.n, p.horizon, p.update.eta)
    w = Portfolio.uniform(p.n)
    steps = []
    for t, rho in enumerate(rel.relatives, start=1):
        steps.append(StepRecord(t, w.dot(rho), p.n * p.cost_per_trade, portfolio=w.weights))
        w = eg_update(w, rho, p.update.eta)
    return _finish(rel, cfg, p, steps, p.horizon * p.n * p.cost_per_trade)


def run_alg2(rel: PriceRelativeSeries, cfg: RunConfig) -> RunReport:
    """Invest 1/s in each of s assets sampled from the exact portfolio."""
    _expect(cfg, Algorithm.ALG2_SAMPLED)
    p = _resolve(rel, cfg)
    logger.info("Running %s: n=%d T=%d eta=%.6g s=%d", cfg.algorithm.value, p.n, p.horizon, p.update.eta, p.s)
    rng = np.random.default_rng(cfg.seed)
    w = Portfolio.uniform(p.n)
    steps = []
    for t, rho in enumerate(rel.relatives, start=1):
        indices = multi_sample(build(w.weights), p.s, rng)
        factor = float(rho[indices].mean())
        expected = w.dot(rho)
        steps.append(StepRecord(
            t, factor, p.s * p.cost_per_trade, portfolio=w.weights, indices=indices,
            hoeffding_ok=_hoeffding_ok(factor, expected, p.horizon),
        ))
        w = eg_update(w, rho, p.update.eta)
    return _finish(rel, cfg, p, steps, p.horizon * p.s * p.cost_per_trade)


def run_alg3(rel: PriceRelativeSeries, cfg: RunConfig) -> RunReport:
    """Sampled investment with the update driven by a sampled inner-product estimate.

    An ε_I override of zero switches the estimator to exact computation.
    """
    _expect(cfg, Algorithm.ALG3_APPROX)
    p = _resolve(rel, cfg)
    _require_regime(p, cfg, with_norm=False)
    logger.info("Running %s: n=%d T=%d eta=%.6g s=%d eps_I=%.6g", cfg.algorithm.value, p.n, p.horizon, p.update.eta,
                p.s, p.update.eps_i)
    rng = np.random.default_rng(cfg.seed)
    step_delta = p.update.delta / p.horizon
    w = Portfolio.uniform(p.n)
    steps = []
    total_queries = 0
    for t, rho in enumerate(rel.relatives, start=1):
        table = build(w.weights)
        indices = multi_sample(table, p.s, rng)
        factor = float(rho[indices].mean())
        truth = w.dot(rho)
        if p.update.eps_i == 0.0:
            i_tilde, queries = truth, p.n
        else:
            i_tilde, budget = relative_inner_product(rho, table, p.update.eps_i, step_delta, rng, x_min=p.update.r_min)
            queries = budget.queries_charged
        total_queries += queries
        steps.append(StepRecord(
            t, factor, p.s * p.cost_per_trade, portfolio=w.weights, indices=indices, i_tilde=i_tilde,
            queries=queries, hoeffding_ok=_hoeffding_ok(factor, truth, p.horizon),
            estimate_ok=_within_band(i_tilde, truth, p.update.eps_i),
        ))
        logger.debug("t=%d factor=%.6g I=%.6g I~=%.6g queries=%d", t, factor, truth, i_tilde, queries)
        w = eeg_update(w, rho, p.update.eta, i_tilde)
    return _finish(rel, cfg, p, steps, p.horizon * p.s * p.cost_per_trade, total_queries)


def run_alg4(rel: PriceRelativeSeries, cfg: RunConfig) -> RunReport:
    """Query-model emulation: history-sum weights, estimated norm and inner product, multi-sampling."""
    _expect(cfg, Algorithm.ALG4_QUANTUM_EMULATED)
    p = _resolve(rel, cfg)
    _require_regime(p, cfg, with_norm=True)
    logger.info("Running %s: n=%d T=%d eta=%.6g s=%d eps_I=%.6g eps_Z=%.6g noise=%s", cfg.algorithm.value, p.n,
                p.horizon, p.update.eta, p.s, p.update.eps_i, p.update.eps_z, cfg.noise.label())
    rng = np.random.default_rng(cfg.seed)
    cost = QuantumCostModel(p.n, p.horizon, p.update.r_min, p.update.delta)
    lw = LogWeights.empty(p.n, p.update.eta)
    steps = []
    band_ok = 0
    for t, rho in enumerate(rel.relatives, start=1):
        before = cost.total_queries
        history = lw.pushes
        _, log_q_max = q_max_find(lw.exponents, cost, history)
        v = scaled_weights(lw, log_q_max)
        z_tilde = q_norm_estimate(v, p.update.eps_z, cfg.noise, cost, rng, history)
        band_ok += _within_band(z_tilde, float(v.sum()), p.update.eps_z)
        table = q_state_prepare_sampler(lw, z_tilde, cost, history, log_q_max)
        w_tilde = approximate_weights(lw, z_tilde, log_q_max)
        indices = q_multi_sample(table, p.s, p.update.eps_z, cost, rng, history)
        factor = float(rho[indices].mean())
        cost.charge("price_oracle", 1)
        truth = float(w_tilde @ rho)
        i_tilde = q_inner_product(rho, w_tilde, p.update.eps_i, cfg.noise, cost, rng, history)
        steps.append(StepRecord(
            t, factor, p.s * p.cost_per_trade, portfolio=w_tilde, indices=indices, i_tilde=i_tilde,
            z_tilde=z_tilde, queries=cost.total_queries - before,
            hoeffding_ok=_hoeffding_ok(factor, float(table.probabilities() @ rho), p.horizon),
            estimate_ok=_within_band(i_tilde, truth, p.update.eps_i),
        ))
        logger.debug("t=%d factor=%.6g Z~=%.6g I~=%.6g queries=%d", t, factor, z_tilde, i_tilde,
                     cost.total_queries - before)
        lw = log_history_push(lw, rho, i_tilde)
    if cost.fallbacks:
        logger.warning("s=%d is outside 1 < s < n=%d; charged direct sampling on %d steps", p.s, p.n,
                       cost.fallbacks)
    return _finish(
        rel, cfg, p, steps, p.horizon * p.s * p.cost_per_trade, cost.total_queries, cost.history_queries,
        {"norm_ok": band_ok, "multi_sample_fallbacks": cost.fallbacks},
    )


_RUNNERS: dict[Algorithm, Callable[[PriceRelativeSeries, RunConfig], RunReport]] = {
    Algorithm.ALG1_EG: run_alg1,
    Algorithm.ALG2_SAMPLED: run_alg2,
    Algorithm.ALG3_APPROX: run_alg3,
    Algorithm.ALG4_QUANTUM_EMULATED: run_alg4,
}


def run(rel: PriceRelativeSeries, cfg: RunConfig) -> RunReport:
    return _RUNNERS[cfg.algorithm](rel, cfg)


def run_replications(
    market_factory: Callable[[int], PriceRelativeSeries],
    cfg: RunConfig,
    seeds: Iterable[int],
    workers: int = 1,
) -> list[RunReport]:
    """One run per seed (the seed drives both the market and the run), returned in seed order."""
    ordered = sorted(seeds)

    def one(seed: int) -> RunReport:
        return run(market_factory(seed), replace(cfg, seed=seed))

    if workers <= 1:
        return [one(seed) for seed in ordered]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, ordered))


# --- erroneous-update trajectories ---


@dataclass(frozen=True)
class EegTrajectory:
    weights: NDArray[np.float64]
    i_tildes: NDArray[np.float64]
    z_tildes: NDArray[np.float64] | None
    log_wealth: float
    eta: float
    eps_i: float
    eps_z: float


def run_eeg_trajectory(
    rel: PriceRelativeSeries,
    eta: float | None = None,
    eps_i: float | None = None,
    eps_z: float | None = None,
    noise: NoiseModel | None = None,
    seed: int = 0,
) -> EegTrajectory:
    """Chain erroneous updates from the uniform portfolio with injected Ĩ and Z̃ errors.

    The vectors are not renormalized between steps. ``eps_z=0`` uses the exact
    normalizer. Defaults are the tuned learning rate and the matching tolerances,
    with worst-case positive errors.
    """
    noise = NoiseModel(NoiseKind.WORST_CASE_SIGN, 1) if noise is None else noise
    eta = learning_rate(rel.n, rel.horizon, rel.r_min) if eta is None else eta
    eps_i = inner_product_tolerance(eta, rel.r_min) if eps_i is None else eps_i
    eps_z = norm_tolerance(eta, rel.r_min) if eps_z is None else eps_z
    if not 0.0 <= eps_i < 0.5:
        raise EpsITooLargeError("eps_I < 1/2", eps_I=eps_i, eta=eta, r_min=rel.r_min)
    if not 0.0 <= eps_z < 0.5:
        raise EpsZTooLargeError("eps_Z < 1/2", eps_Z=eps_z, eta=eta, r_min=rel.r_min)
    rng = np.random.default_rng(seed)
    w = Portfolio.uniform(rel.n)
    weights = np.empty((rel.horizon, rel.n))
    i_tildes = np.empty(rel.horizon)
    z_tildes = np.empty(rel.horizon)
    logs = []
    for t, rho in enumerate(rel.relatives):
        weights[t] = w.weights
        inner = w.dot(rho)
        logs.append(math.log(inner))
        i_tildes[t] = noise.perturb(inner, eps_i, rng)
        if eps_z > 0.0:
            z_tildes[t] = noise.perturb(exact_normalizer(w, rho, eta, i_tildes[t]), eps_z, rng)
            w = eeg_update(w, rho, eta, i_tildes[t], z_tildes[t])
        else:
            w = eeg_update(w, rho, eta, i_tildes[t])
    return EegTrajectory(weights, i_tildes, z_tildes if eps_z > 0.0 else None, math.fsum(logs), eta, eps_i, eps_z)


def check_erroneous_bound(trajectory: EegTrajectory, rel: PriceRelativeSeries, u: ArrayLike) -> bool:
    """Σ log(w̃·ρ) ≥ Σ log(u·ρ) − slack for a fixed comparison portfolio ``u``."""
    benchmark = math.fsum(np.log(rel.relatives @ np.asarray(u, dtype=np.float64)))
    slack = erroneous_wealth_bound(rel.n, rel.horizon, rel.r_min, with_norm_error=trajectory.eps_z > 0.0)
    return trajectory.log_wealth >= benchmark - slack
