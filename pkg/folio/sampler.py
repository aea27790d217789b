"""Alias-table sampling from a probability vector.

Construction is a single pass over two work stacks (Vose's method); each draw
consumes exactly two uniforms from the caller's ``numpy.random.Generator``:
one picks a column, the other decides between the column's own index and its
alias.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from numpy.typing import NDArray

from .errors import InputError
from .errors import InvalidSError
from .errors import NegativeEntryError
from .errors import NotNormalizedError
from .errors import ZeroVectorError

NORMALIZATION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class AliasTable:
    prob: NDArray[np.float64]
    alias: NDArray[np.int64]

    @property
    def n(self) -> int:
        return self.prob.size

    def probabilities(self) -> NDArray[np.float64]:
        """Exact output distribution, reconstructed column by column."""
        out = self.prob.copy()
        np.add.at(out, self.alias, 1.0 - self.prob)
        return out / self.n


def build(p: ArrayLike) -> AliasTable:
    """Build the alias table of ``p``.

    ``p`` may deviate from summing to one by at most
    :data:`NORMALIZATION_TOLERANCE`; it is renormalized silently within that
    band and rejected outside it.
    """
    weights = np.array(p, dtype=np.float64)
    if weights.ndim != 1 or weights.size < 1:
        raise InputError(f"expected a non-empty probability vector, got shape {weights.shape}")
    if not np.all(np.isfinite(weights)):
        raise InputError("probability vector must be finite")
    if np.any(weights < 0):
        raise NegativeEntryError(f"negative entry {weights.min()!r} in probability vector")
    total = weights.sum()
    if total == 0.0:
        raise ZeroVectorError("probability vector is all zeros")
    if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
        raise NotNormalizedError(f"probability vector sums to {total!r}")

    n = weights.size
    scaled = weights * (n / total)
    prob = np.ones(n)
    alias = np.arange(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        lo = small.pop()
        hi = large.pop()
        prob[lo] = scaled[lo]
        alias[lo] = hi
        scaled[hi] = (scaled[hi] + scaled[lo]) - 1.0
        if scaled[hi] < 1.0:
            small.append(hi)
        else:
            large.append(hi)
    # Leftovers are 1 up to rounding and keep prob = 1, alias = self.
    prob.setflags(write=False)
    alias.setflags(write=False)
    return AliasTable(prob, alias)


def _lookup(table: AliasTable, u: NDArray[np.float64]) -> NDArray[np.int64]:
    column = np.minimum((u[..., 0] * table.n).astype(np.int64), table.n - 1)
    keep = u[..., 1] < table.prob[column]
    return np.where(keep, column, table.alias[column])


def sample(table: AliasTable, rng: np.random.Generator) -> int:
    return int(_lookup(table, rng.random(2)))


def multi_sample(table: AliasTable, s: int, rng: np.random.Generator) -> NDArray[np.int64]:
    """``s`` independent draws with replacement.

    Consumes the stream in the same order as ``s`` calls to :func:`sample`, so
    both produce identical indices from identically seeded generators.
    """
    if s < 1:
        raise InvalidSError(f"s must be >= 1, got {s}")
    return _lookup(table, rng.random((s, 2)))
