"""Smoluchowski coagulation with multiplicative kernel, in volume-density form.

The unknown is ``m(t, v) = v f(t, v)``, evolving as ``dm/dt = -dQ/dv`` with

    Q[m](t, v) = int_0^v v1 m(v1) int_{v-v1}^R m(v2) dv2 dv1

truncated at ``R``. The collision integral is replaced by a Sobol estimate on
intervals that move with ``v``; ``dQ/dv`` is taken through those moving
endpoints exactly, so the residual is a smooth function of the parameters.

Inner sampling layouts:

``tensor``
    ``n_inner`` points on ``[0, v]`` and, for each of them, ``n_inner`` points
    on ``[v - v1, R]`` (``n_inner**2`` evaluations per residual point).
``paired``
    ``n_inner`` two-dimensional Sobol points, one ``v2`` per ``v1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import lowdisc
from .errors import ConfigError, DomainError
from .field import NetworkParameters, as_field, objective_gradient

T_GEL = 1.0


@dataclass
class SCEConfig:
    T: float = 0.8
    R: float = 8.0
    n_time: int = 16
    n_volume: int = 16
    n_initial: int = 16
    n_inner: int = 32
    layout: str = "tensor"
    volume_skip: int = 0   # only time samples must avoid the origin

    def validate(self) -> None:
        if self.volume_skip < 0:
            raise ConfigError("volume_skip must be >= 0")
        if self.T <= 0 or self.R <= 0:
            raise ConfigError(f"T and R must be positive (T={self.T}, R={self.R})")
        for name in ("n_time", "n_volume", "n_initial", "n_inner"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.layout not in ("tensor", "paired"):
            raise ConfigError(f"unknown inner layout {self.layout!r}")


def inner_unit_points(n_inner: int, layout: str):
    """Unit coordinates ``u1`` of shape ``(n,)`` and ``u2`` of shape ``(n, n2)``.

    ``u2[a]`` are the inner coordinates paired with ``u1[a]``; the tensor layout
    uses the same row for every ``a``.
    """
    pts = lowdisc.sobol_points(2, n_inner, skip=1)
    u1 = pts[:, 0].copy()
    if layout == "tensor":
        u2 = np.broadcast_to(pts[:, 1], (n_inner, n_inner)).copy()
    elif layout == "paired":
        u2 = pts[:, 1:2].copy()
    else:
        raise ConfigError(f"unknown inner layout {layout!r}")
    return u1, u2


@dataclass
class SCESamplePlan:
    T: float
    R: float
    S: np.ndarray          # (N, 2) residual points (t, v)
    S0: np.ndarray         # (n0,) initial-condition volumes
    u1: np.ndarray         # (n1,)
    u2: np.ndarray         # (n1, n2)

    @property
    def outer(self) -> lowdisc.AffineIntervalMap:
        return lowdisc.AffineIntervalMap(lambda v: 0.0 * v, lambda v: v,
                                         dupper=lambda v: 1.0)

    @property
    def inner(self) -> lowdisc.AffineIntervalMap:
        # context is the pair (v, v1); derivative is w.r.t. v with v1 = v u1
        R = self.R
        return lowdisc.AffineIntervalMap(lambda c: c[0] - c[1], lambda c: R + 0.0 * c[0])


def build_plan(cfg: SCEConfig) -> SCESamplePlan:
    """Residual samples are the tensor grid of Sobol times and Sobol volumes."""
    cfg.validate()
    times = lowdisc.map_to_rect(
        np.column_stack([lowdisc.sobol_points(1, cfg.n_time)[:, 0],
                         np.zeros(cfg.n_time)]), cfg.T, cfg.R)[:, 0]
    vols = lowdisc.sobol_points(1, cfg.n_volume, skip=cfg.volume_skip)[:, 0] * cfg.R
    tt, vv = np.meshgrid(times, vols, indexing="ij")
    S = np.column_stack([tt.ravel(), vv.ravel()])
    S0 = vols[:min(cfg.n_initial, cfg.n_volume)].copy()
    if cfg.n_initial > cfg.n_volume:
        S0 = lowdisc.sobol_points(1, cfg.n_initial, skip=cfg.volume_skip)[:, 0] * cfg.R
    u1, u2 = inner_unit_points(cfg.n_inner, cfg.layout)
    return SCESamplePlan(cfg.T, cfg.R, S, S0, u1, u2)


def m0(v):
    return np.exp(-np.asarray(v, dtype=float))


# -- modified Bessel function I1 ---------------------------------------------

def bessel_i1_series(x, scaled: bool = False):
    """Power series sum_k (x/2)^(2k+1) / (k! (k+1)!), summed to full precision."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("bessel_i1_series is defined here for x >= 0")
    if not scaled and np.any(x > 700):
        raise OverflowError("I1(x) overflows for x > 700; use scaled=True")
    half = x / 2.0
    q = half * half
    term = half.copy()
    total = term.copy()
    k = 0
    while True:
        term = term * q / ((k + 1) * (k + 2))
        total = total + term
        k += 1
        if np.all(term <= 1e-17 * total) and k > 2 * np.max(half, initial=0.0):
            break
    return total * np.exp(-x) if scaled else total


def bessel_i1(x: float, scaled: bool = False) -> float:
    """``(1/pi) int_0^pi exp(x cos th) cos th d th`` by adaptive quadrature.

    With ``scaled`` the integrand carries ``exp(-x)``, returning ``exp(-x) I1(x)``.
    """
    x = float(x)
    if x < 0:
        raise DomainError("bessel_i1 is defined here for x >= 0")
    if not scaled and x > 700:
        raise OverflowError("I1(x) overflows for x > 700; use scaled=True")
    if x == 0.0:
        return 0.0
    shift = x if scaled else 0.0
    val, _ = integrate.quad(lambda th: np.exp(x * np.cos(th) - shift) * np.cos(th),
                            0.0, np.pi, epsabs=0.0, epsrel=1e-13, limit=400)
    return val / np.pi


def bessel_i1e(x):
    """Vectorized ``exp(-x) I1(x)`` for ``x >= 0``.

    The integral representation has a smooth periodic integrand, so the
    equispaced rule converges geometrically; the node count grows like
    ``sqrt(x)`` to track the peak at ``theta = 0``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("bessel_i1e is defined here for x >= 0")
    flat = x.ravel()
    out = np.empty_like(flat)
    small = flat < 1.0
    # the equispaced rule loses relative accuracy as I1(x) -> 0
    out[small] = bessel_i1_series(flat[small], scaled=True)
    large = flat > 1e4
    out[large] = _i1e_asymptotic(flat[large])
    order = np.argsort(flat)
    order = order[~(small | large)[order]]
    for lo in range(0, order.size, 2048):
        idx = order[lo:lo + 2048]
        xs = flat[idx]
        n = int(np.ceil(np.sqrt(80.0 * xs.max(initial=0.0)))) + 48
        th = 2.0 * np.pi * np.arange(n) / n
        c = np.cos(th)
        out[idx] = (np.exp(xs[:, None] * (c - 1.0)) * c).mean(axis=1)
    return out.reshape(x.shape)


def _i1e_asymptotic(x):
    # exp(-x) I1(x) ~ (2 pi x)^(-1/2) sum_k (-1)^k a_k / x^k, a_k for order 1
    coeffs = (1.0, -3.0 / 8.0, -15.0 / 128.0, -315.0 / 3072.0, -14175.0 / 98304.0)
    inv = 1.0 / x
    acc = np.zeros_like(x)
    for c in reversed(coeffs):
        acc = acc * inv + c
    return acc / np.sqrt(2.0 * np.pi * x)


# -- analytic solution ---------------------------------------------------------

def _decay_rate(t):
    t = np.asarray(t, dtype=float)
    return np.where(t <= T_GEL, 1.0 + t, 2.0 * np.sqrt(t))


def analytic_m(t, v):
    """Exact ``m(t, v)`` for ``m0 = exp(-v)`` (gelation at t = 1).

    ``m = exp(-Tv) I1(2 v sqrt t) / (v sqrt t)`` with ``T = 1 + t`` before
    gelation and ``2 sqrt t`` after; small arguments use the series limit.
    """
    t, v = np.broadcast_arrays(np.asarray(t, float), np.asarray(v, float))
    if np.any(t < 0) or np.any(v < 0):
        raise DomainError("analytic solution needs t >= 0 and v >= 0")
    out = np.empty(t.shape)
    tiny_t = t < 1e-12
    out[tiny_t] = np.exp(-v[tiny_t])
    rest = ~tiny_t
    tr, vr = t[rest], v[rest]
    st = np.sqrt(tr)
    z = 2.0 * vr * st
    rate = _decay_rate(tr)
    small = z < 1e-6
    res = np.empty(tr.shape)
    # I1(z) / (v sqrt t) = 2 I1(z) / z = 1 + z^2/8 + O(z^4)
    res[small] = np.exp(-rate[small] * vr[small]) * (1.0 + z[small] ** 2 / 8.0)
    big = ~small
    res[big] = (np.exp(z[big] - rate[big] * vr[big]) * bessel_i1e(z[big])
                / (vr[big] * st[big]))
    out[rest] = res
    return out


def analytic_f(t, v):
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise DomainError("f(t, v) is singular at v = 0")
    return analytic_m(t, v) / v


def total_volume(t: float, upper: float = np.inf) -> float:
    """``int_0^upper m(t, v) dv`` of the analytic solution."""
    f = lambda v: float(analytic_m(t, v))
    if not np.isinf(upper):
        return integrate.quad(f, 0.0, upper, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
    split = 50.0
    head = integrate.quad(f, 0.0, split, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
    # v = split / s^2 maps the v^(-3/2) post-gel tail to a bounded integrand on (0, 1]
    tail_integrand = lambda s: f(split / s**2) * 2.0 * split / s**3 if s > 1e-8 else 0.0
    tail = integrate.quad(tail_integrand, 0.0, 1.0, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
    return head + tail


# -- discrete collision operator ------------------------------------------------

def _inner_geometry(v, plan: SCESamplePlan):
    """Sample locations for residual volumes ``v`` (shape ``(N,)``)."""
    u1, u2 = plan.u1, plan.u2
    v = np.asarray(v, dtype=float)
    if np.any(v > plan.R) or np.any(v < 0):
        raise DomainError(f"collision operator needs 0 <= v <= R={plan.R}")
    v1 = plan.outer(u1[None, :], v[:, None])                      # (N, n1)
    L = plan.R - v[:, None] + v1                                  # |V2 interval|
    assert np.all(L >= 0)
    v2 = plan.inner(u2[None, :, :], (v[:, None, None], v1[:, :, None]))
    return v1, L, v2


def _combine(v, plan, m1, m1x, m2, m2x):
    """Q-hat and dQ-hat/dv from field samples; also returns pieces for the adjoint."""
    u1, u2 = plan.u1, plan.u2
    v = np.asarray(v, dtype=float)[:, None]
    v1 = v * u1
    L = plan.R - v * (1.0 - u1)
    M2 = m2.mean(axis=-1)
    M2x = (m2x * (1.0 - u2)).mean(axis=-1)
    A = v1 * m1
    Ap = u1 * m1 + v1 * u1 * m1x
    B = L * M2
    Bp = (1.0 - u1) * (L * M2x - M2)
    AB = (A * B).mean(axis=1)
    Q = v[:, 0] * AB
    dQ = AB + v[:, 0] * (Ap * B + A * Bp).mean(axis=1)
    return Q, dQ, (v1, L, A, Ap, B, Bp)


def _sample_field(fld, t, v, plan, need_dx: bool):
    t = np.asarray(t, dtype=float)
    v1, L, v2 = _inner_geometry(v, plan)
    t1 = np.broadcast_to(t[:, None], v1.shape)
    t2 = np.broadcast_to(t[:, None, None], v2.shape)
    m1 = fld.value(t1, v1)
    m2 = fld.value(t2, v2)
    if need_dx:
        return m1, fld.d_dx(t1, v1), m2, fld.d_dx(t2, v2)
    return m1, np.zeros_like(m1), m2, np.zeros_like(m2)


def collision_qmc(field, t, v, plan: SCESamplePlan, chunk: int = 64):
    """Sobol estimate of the truncated collision integral at each ``(t, v)``."""
    return collision_and_derivative(field, t, v, plan, chunk, need_dx=False)[0]


def collision_and_derivative(field, t, v, plan: SCESamplePlan, chunk: int = 64,
                             need_dx: bool = True):
    fld = as_field(field)
    t, v = np.broadcast_arrays(np.atleast_1d(np.asarray(t, float)),
                               np.atleast_1d(np.asarray(v, float)))
    Q = np.empty(t.shape)
    dQ = np.empty(t.shape)
    for lo in range(0, t.size, chunk):
        sl = slice(lo, lo + chunk)
        samples = _sample_field(fld, t[sl], v[sl], plan, need_dx)
        Q[sl], dQ[sl], _ = _combine(v[sl], plan, *samples)
    return Q, dQ


def residual(field, t, v, plan: SCESamplePlan):
    """``dm/dt + dQ-hat/dv`` at each ``(t, v)``."""
    fld = as_field(field)
    t, v = np.broadcast_arrays(np.atleast_1d(np.asarray(t, float)),
                               np.atleast_1d(np.asarray(v, float)))
    _, dQ = collision_and_derivative(fld, t, v, plan)
    return fld.d_dt(t, v) + dQ


def loss(field, plan: SCESamplePlan) -> float:
    fld = as_field(field)
    t, v = plan.S[:, 0], plan.S[:, 1]
    r = residual(fld, t, v, plan)
    ic = fld.value(np.zeros_like(plan.S0), plan.S0) - m0(plan.S0)
    return float(np.mean(r ** 2) + np.mean(ic ** 2))


# -- loss gradient for network parameters ---------------------------------------

@dataclass
class _Layout:
    n: int
    n1: int
    n2: int
    n0: int

    @property
    def slices(self):
        a = self.n
        b = a + self.n * self.n1
        c = b + self.n * self.n1 * self.n2
        return slice(0, a), slice(a, b), slice(b, c), slice(c, c + self.n0)


def _loss_points(t, v, s0, plan):
    v1, _, v2 = _inner_geometry(v, plan)
    n, n1 = v1.shape
    n2 = v2.shape[-1]
    pts = [np.column_stack([t, v]),
           np.column_stack([np.repeat(t, n1), v1.ravel()]),
           np.column_stack([np.repeat(t, n1 * n2), v2.ravel()]),
           np.column_stack([np.zeros_like(s0), s0])]
    dirs = [np.tile([1.0, 0.0], (n, 1)),
            np.tile([0.0, 1.0], (n * n1, 1)),
            np.tile([0.0, 1.0], (n * n1 * n2, 1)),
            np.zeros((len(s0), 2))]
    return np.concatenate(pts), np.concatenate(dirs), _Layout(n, n1, n2, len(s0))


def loss_and_grad(params: NetworkParameters, plan: SCESamplePlan, batch=None,
                  chunk: int = 32768):
    """Semi-discrete loss and its exact parameter gradient.

    ``batch`` optionally selects a subset of residual rows of ``plan.S``; the
    initial-condition term always uses all of ``plan.S0``.
    """
    S = plan.S if batch is None else plan.S[batch]
    t, v = S[:, 0], S[:, 1]
    inputs, dirs, lay = _loss_points(t, v, plan.S0, plan)
    s_c, s_1, s_2, s_0 = lay.slices
    u1, u2 = plan.u1, plan.u2
    target = m0(plan.S0)

    def objective(val, tan):
        mt = tan[s_c]
        m1 = val[s_1].reshape(lay.n, lay.n1)
        m1x = tan[s_1].reshape(lay.n, lay.n1)
        m2 = val[s_2].reshape(lay.n, lay.n1, lay.n2)
        m2x = tan[s_2].reshape(lay.n, lay.n1, lay.n2)
        _, dQ, (v1, L, A, Ap, B, Bp) = _combine(v, plan, m1, m1x, m2, m2x)
        r = mt + dQ
        ic = val[s_0] - target
        J = np.mean(r ** 2) + np.mean(ic ** 2)

        rbar = 2.0 * r / lay.n
        c = rbar[:, None] / lay.n1
        vv = v[:, None]
        Abar = c * (B + vv * Bp)
        Bbar = c * (A + vv * Ap)
        Apbar = c * vv * B
        Bpbar = c * vv * A
        vbar = np.zeros_like(val)
        tbar = np.zeros_like(tan)
        tbar[s_c] = rbar
        vbar[s_1] = (Abar * v1 + Apbar * u1).ravel()
        tbar[s_1] = (Apbar * v1 * u1).ravel()
        M2bar = Bbar * L - Bpbar * (1.0 - u1)
        M2xbar = Bpbar * L * (1.0 - u1)
        vbar[s_2] = np.broadcast_to(M2bar[:, :, None] / lay.n2,
                                    (lay.n, lay.n1, lay.n2)).ravel()
        tbar[s_2] = (M2xbar[:, :, None] * (1.0 - u2) / lay.n2).ravel()
        vbar[s_0] = 2.0 * ic / lay.n0
        return J, vbar, tbar

    return objective_gradient(params, inputs, dirs, objective, chunk=chunk)


def sup_error_grid(R: float, n: int = 2**10) -> np.ndarray:
    """First ``n`` Sobol volumes on ``[0, R]``, sorted."""
    return np.sort(lowdisc.sobol_points(1, n)[:, 0] * R)


class SCEProblem:
    """Training adapter: residual rows are the rows of ``plan.S``."""

    def __init__(self, plan: SCESamplePlan, chunk: int = 32768):
        self.plan = plan
        self.chunk = chunk

    @property
    def n_samples(self) -> int:
        return len(self.plan.S)

    def loss_and_grad(self, params, batch=None):
        return loss_and_grad(params, self.plan, batch, self.chunk)

    def loss(self, params) -> float:
        return loss(params, self.plan)
