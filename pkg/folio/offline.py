"""Best fixed portfolio in hindsight (the LS* benchmark)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from numpy.typing import NDArray
from scipy.special import logsumexp

from .errors import InputError
from .errors import NonFiniteObjectiveError
from .market import PriceRelativeSeries
from .updates import Portfolio

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100_000
_MIN_STEP = 1e-12
_MAX_STEP = 1e8


@dataclass(frozen=True)
class OfflineSolution:
    w_star: Portfolio
    ls_star: float
    iterations: int
    gradient_residual: float


def portfolio_log_gain(w: ArrayLike, rel: PriceRelativeSeries) -> float:
    """F(w) = (1/T) Σ_t log(w·ρ^(t))."""
    gains = rel.relatives @ np.asarray(w, dtype=np.float64)
    return float(np.mean(np.log(gains)))


def _objective(log_w: NDArray[np.float64], rel: PriceRelativeSeries) -> tuple[float, NDArray[np.float64]]:
    w = np.exp(log_w)
    gains = rel.relatives @ w
    value = float(np.mean(np.log(gains)))
    if not math.isfinite(value):
        raise NonFiniteObjectiveError(f"objective is {value!r}")
    gradient = (rel.relatives / gains[:, None]).mean(axis=0)
    return value, gradient


def _residual(log_w: NDArray[np.float64], gradient: NDArray[np.float64]) -> float:
    return float(gradient.max() - np.exp(log_w) @ gradient)


def _ascend(
    log_w: NDArray[np.float64],
    value: float,
    gradient: NDArray[np.float64],
    step: float,
    rel: PriceRelativeSeries,
) -> tuple[NDArray[np.float64], float, NDArray[np.float64], float] | None:
    """Halve the step until the multiplicative step does not decrease F."""
    while step >= _MIN_STEP:
        candidate = log_w + step * gradient
        candidate = candidate - logsumexp(candidate)
        new_value, new_gradient = _objective(candidate, rel)
        if new_value >= value:
            return candidate, new_value, new_gradient, step
        step /= 2.0
    return None


def solve_offline(
    rel: PriceRelativeSeries,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    initial: Portfolio | None = None,
) -> OfflineSolution:
    """Maximize F over the simplex by exponentiated-gradient ascent with backtracking.

    Iterates are kept in log space so weights may decay towards a face of the
    simplex without underflowing. Stops when the residual
    ``max_i ∂F/∂w_i − w·∇F`` drops to ``tol``.
    """
    if not tol > 0:
        raise InputError(f"tol must be positive, got {tol}")
    start = Portfolio.uniform(rel.n) if initial is None else initial
    with np.errstate(divide="ignore"):
        log_w = np.log(start.weights)
    if not np.any(np.isfinite(log_w)):
        raise InputError("initial portfolio has no positive weight")
    log_w = log_w - logsumexp(log_w)

    value, gradient = _objective(log_w, rel)
    step = 1.0
    iterations = 0
    residual = _residual(log_w, gradient)
    while residual > tol and iterations < max_iter:
        iterations += 1
        accepted = _ascend(log_w, value, gradient, step, rel)
        if accepted is None:
            logger.debug("No ascent at floating-point resolution, stopping with residual %.3g", residual)
            break
        log_w, value, gradient, step = accepted
        residual = _residual(log_w, gradient)
        step = min(step * 2.0, _MAX_STEP)

    w_star = np.exp(log_w)
    solution = OfflineSolution(Portfolio(w_star / w_star.sum()), value, iterations, max(residual, 0.0))
    logger.debug("Offline optimum LS*=%.12g after %d iterations (residual %.3g)", value, iterations, residual)
    return solution


def naive_regret_bound(r_min: float) -> float:
    """ln(1/r_min): no online strategy can trail the best fixed portfolio by more."""
    if not 0.0 < r_min <= 1.0:
        raise InputError(f"r_min must lie in (0, 1], got {r_min}")
    return math.log(1.0 / r_min)


def naive_bound_crossover(n: int, r_min: float) -> float:
    """Horizon beyond which the exponentiated-gradient regret bound beats the naive one."""
    if not 0.0 < r_min <= 1.0:
        raise InputError(f"r_min must lie in (0, 1], got {r_min}")
    if r_min == 1.0:
        return math.inf
    return math.log(n) / (2.0 * r_min**2 * math.log(1.0 / r_min) ** 2)
