"""Portfolio vectors and the exact / erroneous exponentiated-gradient updates.

Two state representations are used. Algorithms that rebalance a concrete
vector chain :class:`Portfolio` values through :func:`eg_update` or
:func:`eeg_update`. Algorithms that only ever need the vector on demand keep
the accumulated exponents in :class:`LogWeights` and recover the portfolio
with a max-shifted softmax, which stays finite for arbitrarily long horizons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from numpy.typing import NDArray
from scipy.special import softmax

from .errors import EpsIExceedsRMinError
from .errors import EpsITooLargeError
from .errors import EpsZTooLargeError
from .errors import InputError
from .errors import NonPositiveITildeError
from .errors import NonPositiveZTildeError
from .errors import ZeroInnerProductError

SIMPLEX_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Portfolio:
    """Nonnegative weight vector.

    ``strict`` portfolios sum to 1 within :data:`SIMPLEX_TOLERANCE`. An
    erroneous update with a supplied normalizer yields a non-strict
    (near-simplex) vector whose mass is reported by :attr:`total`.
    """

    weights: NDArray[np.float64]
    strict: bool = True

    def __post_init__(self) -> None:
        weights = np.array(self.weights, dtype=np.float64)
        if weights.ndim != 1 or weights.size < 1:
            raise InputError(f"portfolio must be a non-empty vector, got shape {weights.shape}")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise InputError("portfolio weights must be finite and nonnegative")
        if self.strict and abs(weights.sum() - 1.0) > SIMPLEX_TOLERANCE:
            raise InputError(f"portfolio weights sum to {weights.sum()!r}, expected 1")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, n: int) -> Portfolio:
        return cls(np.full(n, 1.0 / n))

    @property
    def n(self) -> int:
        return self.weights.size

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def dot(self, rho: ArrayLike) -> float:
        return float(self.weights @ np.asarray(rho, dtype=np.float64))


@dataclass(frozen=True)
class LogWeights:
    """Accumulated exponents ``eta * sum_t rho_t / I_t`` of the history-sum form."""

    exponents: NDArray[np.float64]
    eta: float
    pushes: int = 0

    def __post_init__(self) -> None:
        exponents = np.array(self.exponents, dtype=np.float64)
        if exponents.ndim != 1 or exponents.size < 1:
            raise InputError(f"exponents must be a non-empty vector, got shape {exponents.shape}")
        if self.eta < 0:
            raise InputError(f"eta must be nonnegative, got {self.eta}")
        exponents.setflags(write=False)
        object.__setattr__(self, "exponents", exponents)

    @classmethod
    def empty(cls, n: int, eta: float) -> LogWeights:
        return cls(np.zeros(n), eta)

    @property
    def n(self) -> int:
        return self.exponents.size


@dataclass(frozen=True)
class UpdateParams:
    """Learning rate and error tolerances of one erroneous-update regime.

    Construction only checks that the values are meaningful. Whether they lie
    inside a guarantee's regime is asked separately, since the exact and
    sampled algorithms never use the tolerances.
    """

    eta: float
    eps_i: float
    eps_z: float
    delta: float
    r_min: float

    def __post_init__(self) -> None:
        if self.eta < 0:
            raise InputError(f"eta must be nonnegative, got {self.eta}")
        for name in ("eps_i", "eps_z"):
            value = getattr(self, name)
            if value < 0:
                raise InputError(f"{name} must be nonnegative, got {value}")
        if not 0.0 < self.delta < 1.0 / 3.0:
            raise InputError(f"delta must lie in (0, 1/3), got {self.delta}")
        if not 0.0 < self.r_min <= 1.0:
            raise InputError(f"r_min must lie in (0, 1], got {self.r_min}")

    @classmethod
    def for_horizon(cls, n: int, horizon: int, r_min: float, delta: float) -> UpdateParams:
        """Default regime: tuned learning rate with the matching ε_I and ε_Z."""
        eta = learning_rate(n, horizon, r_min)
        return cls(eta, inner_product_tolerance(eta, r_min), norm_tolerance(eta, r_min), delta, r_min)

    def require_inner_product_regime(self) -> None:
        """ε_I < 1/2, and ε_I ≤ r_min so the sampled estimator's floor holds."""
        if self.eps_i >= 0.5:
            raise EpsITooLargeError("eps_I = 3 eta / (4 r_min) < 1/2", eps_I=self.eps_i, eta=self.eta,
                                    r_min=self.r_min)
        if self.eps_i > self.r_min:
            raise EpsIExceedsRMinError("eps_I = 3 eta / (4 r_min) <= r_min", eps_I=self.eps_i, eta=self.eta,
                                       r_min=self.r_min)

    def require_norm_regime(self) -> None:
        if self.eps_z >= 0.5:
            raise EpsZTooLargeError("eps_Z = eta^2 / r_min^2 < 1/2", eps_Z=self.eps_z, eta=self.eta,
                                    r_min=self.r_min)


def learning_rate(n: int, horizon: int, r_min: float) -> float:
    """η = 2 r_min √(2 ln n / T)."""
    if not 0.0 < r_min <= 1.0:
        raise InputError(f"r_min must lie in (0, 1], got {r_min}")
    if n < 1 or horizon <= 0:
        raise InputError(f"need n >= 1 and T > 0, got n={n}, T={horizon}")
    return 2.0 * r_min * math.sqrt(2.0 * math.log(n) / horizon)


def inner_product_tolerance(eta: float, r_min: float) -> float:
    """ε_I = 3η / (4 r_min)."""
    return 3.0 * eta / (4.0 * r_min)


def norm_tolerance(eta: float, r_min: float) -> float:
    """ε_Z = η² / r_min²."""
    return eta**2 / r_min**2


def eg_wealth_bound(n: int, horizon: int, r_min: float) -> float:
    """Slack of Σ log(w·ρ) against any fixed portfolio for the exact update: √(2T ln n) / (2 r_min)."""
    return math.sqrt(2.0 * horizon * math.log(n)) / (2.0 * r_min)


def erroneous_wealth_bound(n: int, horizon: int, r_min: float, with_norm_error: bool = True) -> float:
    """Slack of Σ log(w·ρ) for the erroneous update.

    3√(2T ln n)/r_min when only the inner product is approximate, and
    5√(2T ln n)/r_min when the normalizer is approximate as well.
    """
    factor = 5.0 if with_norm_error else 3.0
    return factor * math.sqrt(2.0 * horizon * math.log(n)) / r_min


def _as_row(rho: ArrayLike, n: int) -> NDArray[np.float64]:
    row = np.asarray(rho, dtype=np.float64)
    if row.shape != (n,):
        raise InputError(f"price-relative row has shape {row.shape}, expected ({n},)")
    return row


def eg_update(w: Portfolio, rho: ArrayLike, eta: float) -> Portfolio:
    """Exact exponentiated-gradient update ``w_i exp(η ρ_i / w·ρ) / Z``."""
    row = _as_row(rho, w.n)
    inner = w.dot(row)
    if not inner > 0.0:
        raise ZeroInnerProductError(f"w·ρ = {inner!r}")
    exponent = eta * row / inner
    # The common shift cancels in the normalizer.
    scaled = w.weights * np.exp(exponent - exponent.max())
    return Portfolio(scaled / scaled.sum())


def eeg_update(
    w: Portfolio,
    rho: ArrayLike,
    eta: float,
    i_tilde: float,
    z_tilde: float | None = None,
) -> Portfolio:
    """Erroneous update ``w_i exp(η ρ_i / Ĩ) / Z̃``.

    With ``z_tilde=None`` the exact normalizer ``Z = Σ_j w_j exp(η ρ_j / Ĩ)``
    is used and the result is a strict portfolio. A supplied ``z_tilde`` is
    applied as-is, so the result sums to ``Z / Z̃`` and is returned non-strict.
    """
    if not i_tilde > 0.0:
        raise NonPositiveITildeError(f"Ĩ must be positive, got {i_tilde!r}")
    row = _as_row(rho, w.n)
    exponent = eta * row / i_tilde
    if z_tilde is None:
        scaled = w.weights * np.exp(exponent - exponent.max())
        return Portfolio(scaled / scaled.sum())
    if not z_tilde > 0.0:
        raise NonPositiveZTildeError(f"Z̃ must be positive, got {z_tilde!r}")
    return Portfolio(w.weights * np.exp(exponent) / z_tilde, strict=False)


def exact_normalizer(w: Portfolio, rho: ArrayLike, eta: float, i_tilde: float) -> float:
    """Z = Σ_j w_j exp(η ρ_j / Ĩ), the quantity a supplied Z̃ approximates."""
    row = _as_row(rho, w.n)
    return float(w.weights @ np.exp(eta * row / i_tilde))


def log_history_push(lw: LogWeights, rho: ArrayLike, i_tilde: float) -> LogWeights:
    """Append one day to the history sum: ``ℓ_i += η ρ_i / Ĩ``."""
    if not i_tilde > 0.0:
        raise NonPositiveITildeError(f"Ĩ must be positive, got {i_tilde!r}")
    row = _as_row(rho, lw.n)
    return LogWeights(lw.exponents + lw.eta * row / i_tilde, lw.eta, lw.pushes + 1)


def portfolio_from_log(lw: LogWeights) -> Portfolio:
    """Max-shifted softmax of the exponents."""
    if not np.all(np.isfinite(lw.exponents)):
        raise InputError("exponents must be finite")
    weights = softmax(lw.exponents)
    return Portfolio(weights / weights.sum())
