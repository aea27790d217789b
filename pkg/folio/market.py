"""Price data ingestion, price-relative conversion and synthetic test markets."""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from .errors import CsvParseError
from .errors import EmptyFileError
from .errors import InputError
from .errors import NonPositivePriceError
from .errors import RaggedRowsError
from .errors import RMinViolationError
from .errors import UnsupportedKindError
from .updates import Portfolio
from .updates import eg_update
from .updates import learning_rate

logger = logging.getLogger(__name__)

ROW_MAX_TOLERANCE = 1e-12


def _frozen(array: NDArray[np.float64]) -> NDArray[np.float64]:
    array = np.array(array, dtype=np.float64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class PriceSeries:
    """Closing prices, one row per day (day 0 through day T), one column per asset."""

    prices: NDArray[np.float64]
    asset_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        prices = _frozen(self.prices)
        if prices.ndim != 2 or prices.shape[0] < 2 or prices.shape[1] < 1:
            raise InputError(f"prices must be a (T+1) x n matrix with T >= 1 and n >= 1, got shape {prices.shape}")
        bad = np.argwhere(~(np.isfinite(prices) & (prices > 0)))
        if bad.size:
            row, col = (int(v) for v in bad[0])
            raise NonPositivePriceError(row, col, float(prices[row, col]))
        names = tuple(self.asset_names) or tuple(f"asset_{i}" for i in range(prices.shape[1]))
        if len(names) != prices.shape[1]:
            raise InputError(f"{len(names)} asset names for {prices.shape[1]} price columns")
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "asset_names", names)

    @property
    def n(self) -> int:
        return self.prices.shape[1]

    @property
    def horizon(self) -> int:
        return self.prices.shape[0] - 1


@dataclass(frozen=True)
class PriceRelativeSeries:
    """Row-max-normalized price relatives with a known lower bound ``r_min``."""

    relatives: NDArray[np.float64]
    r_min: float
    asset_names: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        rel = _frozen(self.relatives)
        if rel.ndim != 2 or rel.shape[0] < 1 or rel.shape[1] < 1:
            raise InputError(f"relatives must be a T x n matrix, got shape {rel.shape}")
        if not 0.0 < self.r_min <= 1.0:
            raise RMinViolationError(f"r_min must lie in (0, 1], got {self.r_min}")
        if not np.all(np.isfinite(rel)):
            raise InputError("relatives must be finite")
        row_max = rel.max(axis=1)
        if np.any(np.abs(row_max - 1.0) > ROW_MAX_TOLERANCE):
            t = int(np.argmax(np.abs(row_max - 1.0)))
            raise InputError(f"row {t} has maximum {row_max[t]!r}, expected 1")
        if rel.min() < self.r_min:
            raise RMinViolationError(f"entry {rel.min()!r} is below r_min={self.r_min}")
        names = tuple(self.asset_names) or tuple(f"asset_{i}" for i in range(rel.shape[1]))
        object.__setattr__(self, "relatives", rel)
        object.__setattr__(self, "r_min", float(self.r_min))
        object.__setattr__(self, "asset_names", names)

    @property
    def n(self) -> int:
        return self.relatives.shape[1]

    @property
    def horizon(self) -> int:
        return self.relatives.shape[0]

    def permuted(self, order: NDArray[np.int64]) -> PriceRelativeSeries:
        """Same market with the asset columns reordered."""
        return PriceRelativeSeries(
            self.relatives[:, order],
            self.r_min,
            tuple(self.asset_names[i] for i in order),
        )


class RMinPolicy(str, enum.Enum):
    REJECT = "reject"
    CLAMP = "clamp"


class MarketKind(str, enum.Enum):
    IID_UNIFORM = "iid_uniform"
    TWO_ASSET_ALTERNATING = "two_asset_alternating"
    ADVERSARIAL_FOLLOW_LEADER = "adversarial_follow_leader"


@dataclass(frozen=True)
class MarketGenConfig:
    kind: MarketKind
    n: int
    horizon: int
    r_min: float
    seed: int = 0

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "kind", MarketKind(self.kind))
        except ValueError as e:
            raise UnsupportedKindError(f"unknown market kind: {self.kind!r}") from e
        if not 0.0 < self.r_min <= 1.0:
            raise RMinViolationError(f"r_min must lie in (0, 1], got {self.r_min}")
        if self.horizon < 1:
            raise InputError(f"T must be >= 1, got {self.horizon}")
        if self.n < 1:
            raise InputError(f"n must be >= 1, got {self.n}")
        if self.kind is not MarketKind.IID_UNIFORM and self.n < 2:
            raise UnsupportedKindError(f"{self.kind.value} needs n >= 2, got n={self.n}")
        if not 0 <= self.seed < 2**64:
            raise InputError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


def relatives_from_prices(
    prices: PriceSeries,
    r_min_policy: RMinPolicy | str = RMinPolicy.REJECT,
    r_min_floor: float | None = None,
) -> PriceRelativeSeries:
    """Convert closing prices into row-max-normalized price relatives.

    Under ``reject`` the lower bound is the observed minimum relative. Under
    ``clamp`` the bound is ``r_min_floor``; entries below it are raised to it
    and each row is renormalized so its maximum is 1 again.
    """
    policy = RMinPolicy(r_min_policy)
    returns = prices.prices[1:] / prices.prices[:-1]
    rel = returns / returns.max(axis=1, keepdims=True)
    if policy is RMinPolicy.CLAMP:
        if r_min_floor is None or not 0.0 < r_min_floor <= 1.0:
            raise RMinViolationError(f"clamp policy needs a floor in (0, 1], got {r_min_floor}")
        clamped = int(np.count_nonzero(rel < r_min_floor))
        if clamped:
            logger.info("Clamped %d price relatives up to r_min=%g", clamped, r_min_floor)
        rel = np.maximum(rel, r_min_floor)
        rel = rel / rel.max(axis=1, keepdims=True)
        r_min = float(r_min_floor)
    else:
        r_min = float(rel.min())
        if not r_min > 0.0:
            raise RMinViolationError(f"observed minimum price relative {r_min!r} is not positive")
    return PriceRelativeSeries(rel, r_min, prices.asset_names)


def _follow_leader_market(cfg: MarketGenConfig) -> NDArray[np.float64]:
    eta = learning_rate(cfg.n, cfg.horizon, cfg.r_min)
    w = Portfolio.uniform(cfg.n)
    rows = np.ones((cfg.horizon, cfg.n))
    for t in range(cfg.horizon):
        leader = int(np.argmax(w.weights))
        rows[t, leader] = cfg.r_min
        w = eg_update(w, rows[t], eta)
    return rows


def generate_market(cfg: MarketGenConfig) -> PriceRelativeSeries:
    """Build a synthetic price-relative series; a pure function of ``cfg``."""
    if cfg.kind is MarketKind.IID_UNIFORM:
        rng = np.random.default_rng(cfg.seed)
        draws = rng.uniform(cfg.r_min, 1.0, size=(cfg.horizon, cfg.n))
        rows = draws / draws.max(axis=1, keepdims=True)
    elif cfg.kind is MarketKind.TWO_ASSET_ALTERNATING:
        rows = np.full((cfg.horizon, cfg.n), cfg.r_min)
        rows[0::2, 0] = 1.0
        rows[1::2, 1] = 1.0
    else:
        rows = _follow_leader_market(cfg)
    logger.debug("Generated %s market n=%d T=%d r_min=%g seed=%d", cfg.kind.value, cfg.n, cfg.horizon, cfg.r_min,
                 cfg.seed)
    return PriceRelativeSeries(rows, cfg.r_min)


_LINE_RE = re.compile(r"line (\d+)")


def load_csv(path: str | Path) -> PriceSeries:
    """Read a header row of asset names followed by one row of closing prices per day.

    Row and column numbers in errors are 1-based and count the header as row 1.
    """
    try:
        frame = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError as e:
        raise EmptyFileError(f"{path} is empty") from e
    except pd.errors.ParserError as e:
        match = _LINE_RE.search(str(e))
        raise RaggedRowsError(int(match.group(1)) if match else -1, str(e).strip()) from e
    except UnicodeDecodeError as e:
        raise InputError(f"{path} is not UTF-8 text: {e.reason} at byte {e.start}") from e
    if frame.shape[0] < 1:
        raise EmptyFileError(f"{path} has no header row")
    names = tuple(str(v).strip() for v in frame.iloc[0])
    body = frame.iloc[1:]
    if body.shape[0] == 0:
        raise EmptyFileError(f"{path} has a header but no price rows")
    prices = np.empty(body.shape, dtype=np.float64)
    for r, (_, row) in enumerate(body.iterrows()):
        for c, cell in enumerate(row):
            text = cell.strip() if isinstance(cell, str) else ""
            if not text:
                # Short rows are padded with empty fields by the parser.
                raise RaggedRowsError(r + 2, f"missing value in column {c + 1}")
            try:
                prices[r, c] = float(text)
            except ValueError as e:
                raise CsvParseError(r + 2, c + 1, text) from e
    return PriceSeries(prices, names)
