"""Sobol points and the affine maps that place them on sampling intervals.

The generator is a plain (unscrambled) base-2 Sobol sequence in Gray-code
order, with the Joe-Kuo ``new-joe-kuo-6.21201`` direction numbers for the
first two dimensions. Points are produced directly from their index, so any
window ``skip .. skip + count - 1`` is available without replaying the stream.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from .errors import ConfigError, DomainError

BITS = 32
MAX_DIMENSION = 2

# (degree s, coefficient a, initial m_1..m_s); dimension 1 is van der Corput.
_JOE_KUO = {
    2: (1, 0, (1,)),
}

# offset used for time samples that land on t = 0, as a fraction of T
TIME_EPSILON_FRACTION = 2.0**-30


def direction_numbers(dimension: int, bits: int = BITS) -> np.ndarray:
    """Integer direction numbers ``V_k = m_k * 2**(bits - k)`` for one dimension."""
    if dimension == 1:
        m = [1] * bits
    else:
        s, a, m_init = _JOE_KUO[dimension]
        m = list(m_init)
        for k in range(s, bits):
            new = m[k - s] ^ (m[k - s] << s)
            for j in range(1, s):
                if (a >> (s - 1 - j)) & 1:
                    new ^= m[k - j] << j
            m.append(new)
    return np.array([m[k] << (bits - 1 - k) for k in range(bits)], dtype=np.uint64)


@dataclass
class SobolStream:
    """Sequential view of the sequence; ``index`` is the next point to emit."""

    dimension: int
    index: int = 1
    direction_table: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        _check_dimension(self.dimension)
        self.direction_table = np.stack(
            [direction_numbers(d + 1) for d in range(self.dimension)]
        )

    def take(self, count: int) -> np.ndarray:
        pts = sobol_points(self.dimension, count, skip=self.index)
        self.index += count
        return pts


def _check_dimension(dimension: int) -> None:
    if not 1 <= dimension <= MAX_DIMENSION:
        raise ConfigError(
            f"Sobol dimension must be in 1..{MAX_DIMENSION}, got {dimension}"
        )


def sobol_points(dimension: int, count: int, skip: int = 1) -> np.ndarray:
    """Points ``skip .. skip + count - 1`` of the Sobol sequence.

    Returns an array of shape ``(count, dimension)`` in ``[0, 1)``. The default
    ``skip=1`` drops the origin.
    """
    _check_dimension(dimension)
    if count < 1:
        raise ConfigError(f"count must be >= 1, got {count}")
    if skip < 0:
        raise ConfigError(f"skip must be >= 0, got {skip}")
    if skip + count > 2**BITS:
        raise ConfigError("requested indices exceed the 32-bit sequence length")

    n = np.arange(skip, skip + count, dtype=np.uint64)
    gray = n ^ (n >> np.uint64(1))
    out = np.empty((count, dimension))
    for d in range(dimension):
        v = direction_numbers(d + 1)
        acc = np.zeros(count, dtype=np.uint64)
        for k in range(BITS):
            bit = (gray >> np.uint64(k)) & np.uint64(1)
            acc ^= bit * v[k]
        out[:, d] = acc.astype(np.float64) / 2.0**BITS
    return out


def map_to_rect(points: np.ndarray, T: float, R: float,
                eps: Optional[float] = None) -> np.ndarray:
    """Map unit-square points onto ``(0, T] x [0, R]``.

    Time coordinates that map to exactly zero are moved to ``eps``
    (default ``T * 2**-30``) so that every residual sample has ``t > 0``.
    """
    if T <= 0 or R <= 0:
        raise ConfigError(f"T and R must be positive, got T={T}, R={R}")
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    out = points * np.array([T, R])
    if eps is None:
        eps = T * TIME_EPSILON_FRACTION
    out[out[:, 0] == 0.0, 0] = eps
    return out


@dataclass(frozen=True)
class AffineIntervalMap:
    """Interval ``[lower(ctx), upper(ctx)]`` whose endpoints depend on a context.

    ``dlower``/``dupper`` are derivatives of the endpoints with respect to the
    scalar context variable; they let callers chain ``d/dctx`` through the map.
    The callables must broadcast over numpy arrays.
    """

    lower: Callable[[Any], Any]
    upper: Callable[[Any], Any]
    dlower: Callable[[Any], Any] = lambda ctx: 0.0
    dupper: Callable[[Any], Any] = lambda ctx: 0.0

    def __call__(self, u, ctx):
        return map_nested(u, self, ctx)

    def derivative(self, u, ctx):
        """d/dctx of ``lower + u (upper - lower)`` at fixed unit coordinate."""
        return (1.0 - u) * self.dlower(ctx) + u * self.dupper(ctx)

    def length(self, ctx):
        return self.upper(ctx) - self.lower(ctx)


def map_nested(u, interval: AffineIntervalMap, ctx, check: bool = True):
    lo = interval.lower(ctx)
    hi = interval.upper(ctx)
    if check and np.any(np.asarray(hi) < np.asarray(lo)):
        raise DomainError("degenerate interval: upper endpoint below lower endpoint")
    return lo + u * (hi - lo)


def export_samples_csv(path, unit: np.ndarray, mapped: np.ndarray) -> None:
    """Write ``index, u1, u2, mapped1, mapped2`` rows for debugging a sample set."""
    unit = np.asarray(unit, dtype=float).reshape(len(unit), -1)
    mapped = np.asarray(mapped, dtype=float).reshape(len(mapped), -1)
    width = unit.shape[1]
    header = ["index"] + [f"u{k + 1}" for k in range(width)] + [
        f"mapped{k + 1}" for k in range(width)
    ]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, (a, b) in enumerate(zip(unit, mapped)):
            w.writerow([i, *(repr(float(x)) for x in a), *(repr(float(x)) for x in b)])
