"""Explicit finite-volume scheme for the conservative 3-wave kinetic equation.

Cells ``i = 0..M-1`` have faces ``x_i, x_{i+1}``, pivots ``p_i`` and widths
``dp_i``. With ``w_j = dp_j g_j p_j^(gamma/2 - 1)`` the face fluxes are

    Q1(x_f) = sum_{m, j < f} w_m w_j [x_f < p_m + p_j]
    Q2(x_f) = sum_{m, j}     w_m w_j [x_f < p_m + p_j]

and ``g_i <- g_i + (p_i dt / dp_i) (F(x_{i+1}) - F(x_i))`` with ``F = -2 Q1 + Q2``.

``flux_q1``/``flux_q2`` evaluate the face fluxes with prefix sums (one sorted
threshold per pivot). ``step`` uses the same flux difference, but assembled
per cell from positive pair products so that cells holding ~1e-100 of energy
are not swamped by the rounding of O(1) face fluxes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, NumericError

INSTABILITY_LIMIT = 1e12


@dataclass
class FVGrid:
    faces: np.ndarray
    pivots: np.ndarray
    widths: np.ndarray
    R: float
    h: float

    @property
    def M(self) -> int:
        return len(self.pivots)


def build_grid(h: float, R: float) -> FVGrid:
    """Uniform grid of width ``h`` on ``[0, R]``; a last partial cell absorbs any remainder."""
    if not 0 < h < 1:
        raise ConfigError(f"mesh size must lie in (0, 1), got {h}")
    if R <= 0:
        raise ConfigError(f"R must be positive, got {R}")
    ratio = R / h
    M = int(round(ratio)) if abs(ratio - round(ratio)) < 1e-9 else int(math.ceil(ratio))
    faces = np.arange(M + 1) * h
    faces[-1] = R
    pivots = 0.5 * (faces[1:] + faces[:-1])
    widths = np.diff(faces)
    return FVGrid(faces, pivots, widths, float(R), float(h))


@dataclass
class FVState:
    step: int
    t: float
    g: np.ndarray
    dt: float
    positive: bool = True


def project_initial(g0: Callable, grid: FVGrid, dt: float = 0.0) -> FVState:
    """Midpoint-rule cell averages ``g0(p_i)``."""
    g = np.asarray(g0(grid.pivots), dtype=float) * np.ones(grid.M)
    return FVState(0, 0.0, g, dt, bool(np.all(g >= 0)))


def energy(state_or_g, grid: FVGrid) -> float:
    g = state_or_g.g if isinstance(state_or_g, FVState) else np.asarray(state_or_g)
    return float(np.dot(grid.widths, g))


def weights(g: np.ndarray, grid: FVGrid, gamma: float = 2.0) -> np.ndarray:
    k = gamma / 2.0
    w = grid.widths * g
    if k != 1.0:
        w = w * grid.pivots ** (k - 1.0)
    return w


def _thresholds(grid: FVGrid) -> np.ndarray:
    """``K[f, m] = #{j : p_m + p_j <= x_f}`` for every face f and pivot m."""
    p = grid.pivots
    K = np.empty((grid.M + 1, grid.M), dtype=np.int64)
    for m in range(grid.M):
        # p_m + p_j is non-decreasing in j, so this matches the literal comparison
        K[:, m] = np.searchsorted(p[m] + p, grid.faces, side="right")
    return K


class FluxTables:
    """Per-grid index tables shared by the flux and step routines."""

    def __init__(self, grid: FVGrid):
        self.grid = grid
        M = grid.M
        self.K = _thresholds(grid)
        f = np.arange(M + 1)[:, None]
        m = np.arange(M)[None, :]
        # Q1 only sees cells m < f and, among them, j < f
        self.K1 = np.where(m < f, np.minimum(self.K, f), 0)

        p = grid.pivots
        s = p[:, None] + p[None, :]
        # cell c with x_c < s <= x_{c+1}; pairs beyond R get index M
        band = np.searchsorted(grid.faces, s, side="left") - 1
        band = np.where(s > grid.faces[-1], M, band)
        mm, jj = np.meshgrid(np.arange(M), np.arange(M), indexing="ij")
        in_domain = band < M
        interior = in_domain & (np.maximum(mm, jj) < band)
        edge = in_domain & ~interior
        flat_band = band.ravel()
        self.gain_idx = np.flatnonzero(interior.ravel())
        self.gain_band = flat_band[self.gain_idx]
        self.edge_idx = np.flatnonzero(edge.ravel())
        self.edge_band = flat_band[self.edge_idx]
        # first j with p_c + p_j > x_{c+1}, for the newly included cell c
        self.own = np.array([self.K[c + 1, c] for c in range(M)])
        self.self_pair = 2.0 * p > grid.faces[1:]


def flux_q1(g, grid: FVGrid, gamma: float = 2.0, tables: Optional[FluxTables] = None):
    """Q1 at every face ``x_0 .. x_M`` via prefix sums."""
    tables = tables or FluxTables(grid)
    w = weights(np.asarray(g, float), grid, gamma)
    C = np.concatenate([[0.0], np.cumsum(w)])
    f = np.arange(grid.M + 1)
    # sum_{m<f} w_m (C_f - C_{K1}) = C_f^2 - sum_m w_m C_{K1}
    return C[f] * C[f] - C[tables.K1] @ w


def flux_q2(g, grid: FVGrid, gamma: float = 2.0, tables: Optional[FluxTables] = None):
    """Q2 at every face ``x_0 .. x_M`` via prefix sums."""
    tables = tables or FluxTables(grid)
    w = weights(np.asarray(g, float), grid, gamma)
    C = np.concatenate([[0.0], np.cumsum(w)])
    return C[-1] * C[-1] - C[tables.K] @ w


def flux_q1_naive(g, grid: FVGrid, gamma: float = 2.0, face: Optional[int] = None):
    """Literal double sum; ``face=None`` returns all faces."""
    return _naive(g, grid, gamma, face, restrict=True)


def flux_q2_naive(g, grid: FVGrid, gamma: float = 2.0, face: Optional[int] = None):
    return _naive(g, grid, gamma, face, restrict=False)


def _naive(g, grid, gamma, face, restrict):
    g = np.asarray(g, float)
    p, dp = grid.pivots, grid.widths
    k = gamma / 2.0
    faces = range(grid.M + 1) if face is None else [face]
    out = []
    for f in faces:
        x = grid.faces[f]
        n = f if restrict else grid.M
        total = 0.0
        for m in range(n):
            inner = 0.0
            for j in range(n):
                if x < p[m] + p[j]:
                    a = (p[m] * p[j]) ** k
                    inner += dp[j] * g[j] / p[j] * a
            total += dp[m] * g[m] / p[m] * inner
        out.append(total)
    return np.array(out) if face is None else out[0]


GAIN_DOMAINS = ("square", "below_p")


def flux_difference(g, grid: FVGrid, gamma: float = 2.0,
                    tables: Optional[FluxTables] = None, gain_domain: str = "square") -> np.ndarray:
    """``F(x_{i+1}) - F(x_i)`` for every cell, as gain minus loss.

    The gain collects pairs ``(m, j)`` with both indices below ``i`` whose
    pivot sum falls in cell ``i``; every remaining term carries ``w_i``.

    ``gain_domain="below_p"`` restricts the Q2 sum to ``p_m < x`` as in the
    network's collision operator. Dropping the strip ``p_m > x`` removes
    ``(W - C(x)) W`` from the face flux, i.e. adds ``w_i W`` to each cell.
    """
    if gain_domain not in GAIN_DOMAINS:
        raise ConfigError(f"unknown gain domain {gain_domain!r}")
    tables = tables or FluxTables(grid)
    M = grid.M
    w = weights(np.asarray(g, float), grid, gamma)
    pair = np.multiply.outer(w, w).ravel()
    gain = np.bincount(tables.gain_band, weights=pair[tables.gain_idx], minlength=M)
    edge = np.bincount(tables.edge_band, weights=pair[tables.edge_idx], minlength=M)
    C = np.concatenate([[0.0], np.cumsum(w)])
    c = np.arange(M)
    lo = np.minimum(tables.own, c)
    newcell = 2.0 * w * np.maximum(C[c] - C[lo], 0.0) + np.where(tables.self_pair, w * w, 0.0)
    # -2 dQ1 + dQ2 with dQ1 = newcell - gain and dQ2 = -(gain + edge)
    out = gain - edge - 2.0 * newcell
    if gain_domain == "below_p":
        out = out + w * C[-1]
    return out


def step(state: FVState, grid: FVGrid, dt: Optional[float] = None, gamma: float = 2.0,
         tables: Optional[FluxTables] = None, gain_domain: str = "square") -> FVState:
    dt = state.dt if dt is None else dt
    if dt <= 0:
        raise ConfigError("time step must be positive")
    lam = grid.pivots * dt / grid.widths
    g = state.g + lam * flux_difference(state.g, grid, gamma, tables, gain_domain)
    n = state.step + 1
    if not np.all(np.isfinite(g)):
        raise NumericError(f"non-finite cell values at step {n}")
    return FVState(n, n * dt, g, dt, bool(g.min() >= 0.0))


@dataclass
class SolutionSnapshot:
    t: float
    x: np.ndarray
    values: np.ndarray
    energy: float


@dataclass
class FVSRun:
    grid: FVGrid
    snapshots: list
    times: np.ndarray
    energies: np.ndarray
    first_failure_step: Optional[int]
    min_value: float
    final: FVState

    @property
    def positivity_preserved(self) -> bool:
        return self.first_failure_step is None


class InstabilityError(NumericError):
    """Raised when cell values blow up; ``partial`` holds the run up to the last stable step."""

    def __init__(self, msg, last_stable: FVState, partial: Optional[FVSRun] = None):
        super().__init__(msg)
        self.last_stable = last_stable
        self.partial = partial


def run(h: float, R: float, dt: float, t_final: float, g0: Callable,
        snapshot_times: Sequence[float] = (), gamma: float = 2.0,
        progress: Optional[Callable] = None, gain_domain: str = "square") -> FVSRun:
    """March from ``g0`` to ``t_final`` with fixed ``dt``.

    Energies are recorded at every step; snapshots at the steps nearest the
    requested times. Positivity failures are recorded, not fatal; values
    above ``1e12`` in magnitude abort with the last stable state attached.
    """
    if dt <= 0 or t_final < 0:
        raise ConfigError("need dt > 0 and t_final >= 0")
    if gain_domain not in GAIN_DOMAINS:
        raise ConfigError(f"unknown gain domain {gain_domain!r}")
    grid = build_grid(h, R)
    tables = FluxTables(grid)
    n_steps = int(round(t_final / dt))
    snap_steps = {}
    for ts in snapshot_times:
        if not 0 <= ts <= t_final + 1e-12:
            raise ConfigError(f"snapshot time {ts} outside [0, {t_final}]")
        snap_steps.setdefault(int(round(ts / dt)), []).append(ts)

    state = project_initial(g0, grid, dt)
    times = np.arange(n_steps + 1) * dt
    energies = np.empty(n_steps + 1)
    energies[0] = energy(state, grid)
    snapshots = []
    first_failure = None if state.positive else 0
    min_value = float(state.g.min())

    def snap(s):
        for _ in snap_steps.get(s.step, []):
            snapshots.append(SolutionSnapshot(s.t, grid.pivots.copy(), s.g.copy(),
                                              energy(s, grid)))

    snap(state)
    for n in range(n_steps):
        nxt = step(state, grid, dt, gamma, tables, gain_domain)
        if np.abs(nxt.g).max() > INSTABILITY_LIMIT:
            partial = FVSRun(grid, snapshots, times[:n + 1], energies[:n + 1],
                             first_failure, min_value, state)
            raise InstabilityError(f"cell values exceeded {INSTABILITY_LIMIT:g} at step {nxt.step}",
                                   state, partial)
        state = nxt
        energies[n + 1] = energy(state, grid)
        gmin = float(state.g.min())
        min_value = min(min_value, gmin)
        if first_failure is None and not state.positive:
            first_failure = state.step
        snap(state)
        if progress is not None:
            progress(state)
    return FVSRun(grid, snapshots, times, energies, first_failure, min_value, state)
