"""Post-processing shared by both solvers: energies, decay slopes, errors and comparisons."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import AlignmentError, DomainError
from .field import as_field

ENERGY_NODES = 2**12
DEFAULT_WINDOW = (20.0, 148.0)
ALIGN_TOL = 1e-9


@dataclass
class EnergySeries:
    times: np.ndarray
    energies: np.ndarray
    method: str = "nn"   # nn | fvs | analytic

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.energies = np.asarray(self.energies, dtype=float)
        if self.times.shape != self.energies.shape:
            raise ValueError("times and energies must have equal lengths")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")


@dataclass
class ErrorReport:
    time: float
    sup_error: float
    l2_error: float
    grid: str = ""


def midpoint_nodes(R: float, n: int = ENERGY_NODES):
    if n < 2:
        raise ValueError("need at least two quadrature nodes")
    h = R / n
    return (np.arange(n) + 0.5) * h, h


def total_energy(field, t: float, R: float, n_quad: int = ENERGY_NODES) -> float:
    """Composite-midpoint estimate of the integral of ``g(t, .)`` over ``[0, R]``."""
    p, h = midpoint_nodes(R, n_quad)
    return float(h * np.sum(as_field(field).value(np.full_like(p, t), p)))


def total_energy_qmc(field, t: float, R: float, n: int = ENERGY_NODES) -> float:
    """Sobol estimate of the same integral (cross-check for the midpoint rule)."""
    from .lowdisc import sobol_points
    p = R * sobol_points(1, n)[:, 0]
    return float(R * np.mean(as_field(field).value(np.full_like(p, t), p)))


def energy_series(field, times: Sequence[float], R: float,
                  n_quad: int = ENERGY_NODES, method: str = "nn") -> EnergySeries:
    """Energies at all ``times`` with a single batched field evaluation per time."""
    p, h = midpoint_nodes(R, n_quad)
    fld = as_field(field)
    E = [h * float(np.sum(fld.value(np.full_like(p, t), p))) for t in times]
    return EnergySeries(np.asarray(times, float), np.asarray(E), method)


def decay_slope(series: EnergySeries, window=DEFAULT_WINDOW):
    """Least-squares fit of ``log E`` against ``log t`` on ``window``.

    Returns ``(slope, intercept, r2)``.
    """
    ta, tb = window
    sel = (series.times >= ta) & (series.times <= tb)
    t, E = series.times[sel], series.energies[sel]
    if len(t) < 3:
        raise ValueError(f"need at least 3 samples in window {window}, found {len(t)}")
    if np.any(t <= 0) or np.any(E <= 0):
        raise DomainError("energies and times must be positive inside the fit window")
    x, y = np.log(t), np.log(E)
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def sup_error(field, oracle: Callable, t: float, grid: np.ndarray, label: str = "") -> ErrorReport:
    """Max and root-mean-square absolute difference on ``grid`` at time ``t``."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty evaluation grid")
    approx = as_field(field).value(np.full_like(grid, t), grid)
    diff = np.abs(approx - oracle(t, grid))
    return ErrorReport(float(t), float(diff.max()), float(np.sqrt(np.mean(diff ** 2))), label)


@dataclass
class Comparison:
    time: float
    l2: float
    rel_l2: float
    sup: float


def compare_nn_fvs(nn_snapshots, fvs_snapshots, times: Optional[Sequence[float]] = None):
    """Compare snapshot pairs at common times.

    Both inputs are sequences of objects with ``t``, ``x`` and ``values``. FVS
    values are linearly interpolated to the NN grid; NN points outside the
    pivot range are dropped rather than extrapolated. ``rel_l2`` is the
    discrete L2 difference divided by the FVS L2 norm on the same points.
    """
    nn = {float(s.t): s for s in nn_snapshots}
    fv = list(fvs_snapshots)
    if times is None:
        times = sorted(nn)
    out = []
    for t in times:
        a = match_snapshot(nn.values(), t)
        b = match_snapshot(fv, t)
        if a is None or b is None:
            raise AlignmentError(f"no snapshot pair within {ALIGN_TOL:g} of t={t}")
        x = np.asarray(a.x, float)
        keep = (x >= b.x[0]) & (x <= b.x[-1])
        if not np.any(keep):
            raise AlignmentError(f"NN grid does not overlap the FVS domain at t={t}")
        x = x[keep]
        ref = np.interp(x, b.x, b.values)
        d = np.asarray(a.values, float)[keep] - ref
        l2 = float(np.sqrt(np.mean(d ** 2)))
        norm = float(np.sqrt(np.mean(ref ** 2)))
        out.append(Comparison(float(t), l2, l2 / norm if norm > 0 else np.inf,
                              float(np.abs(d).max())))
    return out


def match_snapshot(snaps, t):
    for s in snaps:
        if abs(float(s.t) - t) <= ALIGN_TOL:
            return s
    return None


# CSV writers. Every file starts with a versioned comment line.

def _writer(path, tag, columns):
    fh = Path(path).open("w", newline="")
    fh.write(f"# wavekin {tag} v1\n")
    w = csv.writer(fh)
    w.writerow(columns)
    return fh, w


def write_table_csv(path, tag: str, columns: Sequence[str], rows) -> None:
    """Generic numeric table; floats are written with full round-trip precision."""
    fh, w = _writer(path, tag, columns)
    with fh:
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def write_energy_csv(path, series: EnergySeries) -> None:
    fh, w = _writer(path, f"energy ({series.method})", ("t", "E"))
    with fh:
        for t, e in zip(series.times, series.energies):
            w.writerow((repr(float(t)), repr(float(e))))


def write_snapshots_csv(path, snapshots) -> None:
    fh, w = _writer(path, "snapshots", ("t", "p", "g"))
    with fh:
        for s in snapshots:
            for x, g in zip(s.x, s.values):
                w.writerow((repr(float(s.t)), repr(float(x)), repr(float(g))))


def write_errors_csv(path, reports: Sequence[ErrorReport]) -> None:
    fh, w = _writer(path, "errors", ("t", "sup_error", "l2_error", "grid"))
    with fh:
        for r in reports:
            w.writerow((repr(r.time), repr(r.sup_error), repr(r.l2_error), r.grid))


def write_comparison_csv(path, rows: Sequence[Comparison]) -> None:
    fh, w = _writer(path, "nn-fvs comparison", ("t", "l2", "rel_l2", "sup"))
    with fh:
        for r in rows:
            w.writerow((repr(r.time), repr(r.l2), repr(r.rel_l2), repr(r.sup)))


def read_csv(path):
    """Rows of a wavekin CSV as a list of dicts (comment line skipped)."""
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def read_energy_csv(path, method: Optional[str] = None) -> EnergySeries:
    """Energy series; the method tag defaults to the one in the header comment."""
    if method is None:
        with Path(path).open() as fh:
            head = fh.readline()
        method = head.split("(")[1].split(")")[0] if "(" in head else "nn"
    rows = read_csv(path)
    return EnergySeries([float(r["t"]) for r in rows], [float(r["E"]) for r in rows], method)


@dataclass
class Snapshot:
    t: float
    x: np.ndarray
    values: np.ndarray


def read_snapshots_csv(path):
    rows = read_csv(path)
    by_t = {}
    for r in rows:
        by_t.setdefault(float(r["t"]), []).append((float(r["p"]), float(r["g"])))
    out = []
    for t, pts in by_t.items():
        arr = np.array(pts)
        out.append(Snapshot(t, arr[:, 0], arr[:, 1]))
    return out


# Minimal SVG line plots (no plotting dependency).

def svg_lines(path, series, title: str = "", logx: bool = False, logy: bool = False,
              width: int = 640, height: int = 420) -> None:
    """``series`` is a list of ``(label, x, y)``; writes a self-contained SVG."""
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    tx = np.log10 if logx else (lambda a: a)
    ty = np.log10 if logy else (lambda a: a)
    prepared = []
    for label, x, y in series:
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logx:
            ok &= x > 0
        if logy:
            ok &= y > 0
        if np.any(ok):
            prepared.append((label, tx(x[ok]), ty(y[ok])))
    allx = np.concatenate([p[1] for p in prepared]) if prepared else np.zeros(1)
    ally = np.concatenate([p[2] for p in prepared]) if prepared else np.zeros(1)
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0
    m = 50

    def sx(v):
        return m + (v - x0) / (x1 - x0) * (width - 2 * m)

    def sy(v):
        return height - m - (v - y0) / (y1 - y0) * (height - 2 * m)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<rect x="{m}" y="{m}" width="{width - 2 * m}" height="{height - 2 * m}" '
             'fill="none" stroke="black"/>',
             f'<text x="{width / 2}" y="{m / 2}" text-anchor="middle" font-size="14">{title}</text>',
             f'<text x="{m}" y="{height - m / 3}" font-size="11">{x0:.3g}</text>',
             f'<text x="{width - m}" y="{height - m / 3}" text-anchor="end" font-size="11">{x1:.3g}</text>',
             f'<text x="4" y="{height - m}" font-size="11">{y0:.3g}</text>',
             f'<text x="4" y="{m + 10}" font-size="11">{y1:.3g}</text>']
    for k, (label, x, y) in enumerate(prepared):
        c = colors[k % len(colors)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        parts.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{width - m - 4}" y="{m + 16 + 14 * k}" text-anchor="end" '
                     f'font-size="11" fill="{c}">{label}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
