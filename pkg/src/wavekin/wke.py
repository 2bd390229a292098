"""Isotropic 3-wave kinetic equation in conservative energy form.

The energy density ``g(t, p)`` obeys ``dg/dt = p dQ/dp`` with

    Q[g](p) = -2 int_0^p int_{p-p1}^p (p1 p2)^(k-1) g1 g2 dp2 dp1
              + int_0^p int_{p-p1}^R (p1 p2)^(k-1) g1 g2 dp2 dp1,   k = gamma/2.

Both inner intervals start at ``p - p1`` so the resonance indicator
``p < p1 + p2`` holds for every sample. As for the coagulation problem, all
sample locations are affine in ``p`` and ``dQ/dp`` is differentiated through
them exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import warnings

import numpy as np

from . import lowdisc
from .errors import ConfigError, DomainError
from .field import NetworkParameters, as_field, objective_gradient
from .sce import inner_unit_points


@dataclass
class WKEConfig:
    gamma: float = 2.0
    T: float = 10.0
    R: float = 10.0
    n_W: int = 2**15
    n_initial: int = 1024
    n_inner: int = 32
    layout: str = "tensor"
    stages: tuple = (10.0, 5.0, 2.0)

    def validate(self) -> None:
        if self.gamma < 0:
            raise ConfigError("gamma must be non-negative")
        if self.T <= 0 or self.R <= 0:
            raise ConfigError(f"T and R must be positive (T={self.T}, R={self.R})")
        if self.n_W < 1 or self.n_initial < 1 or self.n_inner < 1:
            raise ConfigError("sample counts must be >= 1")
        if self.n_initial > self.n_W:
            raise ConfigError("initial samples are a subset of W: need n_initial <= n_W")
        if self.layout not in ("tensor", "paired"):
            raise ConfigError(f"unknown inner layout {self.layout!r}")
        if any(T <= 0 for T in self.stages):
            raise ConfigError("stage times must be positive")
        if self.n_W & (self.n_W - 1):
            warnings.warn(f"n_W={self.n_W} is not a power of two; Sobol balance is lost "
                          "and the last batch is shorter", stacklevel=2)


@dataclass
class WKESamplePlan:
    gamma: float
    T: float
    R: float
    W: np.ndarray       # (N, 2) residual samples (t, p)
    W0: np.ndarray      # (n0,) wavenumbers for the initial-condition term
    u1: np.ndarray      # (n1,)  P1 on [0, p]
    u2: np.ndarray      # (n1, n2) P2 on [p - p1, p] and P2-hat on [p - p1, R]

    @property
    def k(self) -> float:
        return self.gamma / 2.0

    @property
    def outer(self) -> lowdisc.AffineIntervalMap:
        return lowdisc.AffineIntervalMap(lambda p: 0.0 * p, lambda p: p, dupper=lambda p: 1.0)

    @property
    def loss_side(self) -> lowdisc.AffineIntervalMap:
        # context (p, p1)
        return lowdisc.AffineIntervalMap(lambda c: c[0] - c[1], lambda c: c[0] + 0.0 * c[1])

    @property
    def gain_side(self) -> lowdisc.AffineIntervalMap:
        R = self.R
        return lowdisc.AffineIntervalMap(lambda c: c[0] - c[1], lambda c: R + 0.0 * c[0])


def build_plan(cfg: WKEConfig, T: float | None = None) -> WKESamplePlan:
    cfg.validate()
    T = cfg.T if T is None else T
    W = lowdisc.map_to_rect(lowdisc.sobol_points(2, cfg.n_W), T, cfg.R)
    W0 = W[:cfg.n_initial, 1].copy()
    u1, u2 = inner_unit_points(cfg.n_inner, cfg.layout)
    return WKESamplePlan(cfg.gamma, T, cfg.R, W, W0, u1, u2)


def g0(p):
    """Gaussian bump of unit mass centred at p = 2 with variance 1/7."""
    p = np.asarray(p, dtype=float)
    return np.sqrt(7.0 / (2.0 * np.pi)) * np.exp(-3.5 * (p - 2.0) ** 2)


def _pw(x, e, coeff=1.0):
    """``coeff * x**e`` that is exactly zero when ``coeff`` is zero."""
    if coeff == 0.0:
        return np.zeros_like(x)
    if e == 0.0:
        return np.full_like(x, coeff)
    return coeff * x ** e


def _geometry(p, plan: WKESamplePlan):
    p = np.asarray(p, dtype=float)
    if np.any(p > plan.R) or np.any(p < 0):
        raise DomainError(f"collision operator needs 0 <= p <= R={plan.R}")
    u1, u2 = plan.u1, plan.u2
    p1 = plan.outer(u1[None, :], p[:, None])
    ctx = (p[:, None, None], p1[:, :, None])
    p2 = plan.loss_side(u2[None, :, :], ctx)
    ph2 = plan.gain_side(u2[None, :, :], ctx)
    return p1, p2, ph2


def _combine(p, plan: WKESamplePlan, G1, G1x, G2, G2x, H2, H2x):
    """Q-hat, dQ-hat/dp and the intermediate terms used by the adjoint."""
    k = plan.k
    u1, u2 = plan.u1, plan.u2
    p = np.asarray(p, dtype=float)[:, None]
    p1 = p * u1
    p2 = p[:, :, None] - (p1[:, :, None] * (1.0 - u2)[None])
    Lh = plan.R - p * (1.0 - u1)
    ph2 = p[:, :, None] - p1[:, :, None] + u2[None] * Lh[:, :, None]
    dp2 = 1.0 - u1[:, None] * (1.0 - u2)                # (n1, n2)
    dph2 = (1.0 - u1)[:, None] * (1.0 - u2)
    dLh = -(1.0 - u1)

    a2, da2 = _pw(p2, k - 1.0), _pw(p2, k - 2.0, k - 1.0)
    ah, dah = _pw(ph2, k - 1.0), _pw(ph2, k - 2.0, k - 1.0)
    S2 = (a2 * G2).mean(axis=-1)
    S2p = ((da2 * G2 + a2 * G2x) * dp2).mean(axis=-1)
    Sh = (ah * H2).mean(axis=-1)
    Shp = ((dah * H2 + ah * H2x) * dph2).mean(axis=-1)

    pk, pk1, pk2 = _pw(p1, k), _pw(p1, k - 1.0), _pw(p1, k - 2.0, k - 1.0)
    X = pk * G1
    Xp = (_pw(p1, k - 1.0, k) * G1 + pk * G1x) * u1
    Y = pk1 * G1
    Yp = (pk2 * G1 + pk1 * G1x) * u1

    loss_mean = (X * S2).mean(axis=1)
    gain_mean = (Y * Lh * Sh).mean(axis=1)
    pc = p[:, 0]
    Q = -2.0 * pc * loss_mean + pc * gain_mean
    dQ = (-2.0 * loss_mean - 2.0 * pc * (Xp * S2 + X * S2p).mean(axis=1)
          + gain_mean + pc * (Yp * Lh * Sh + Y * dLh * Sh + Y * Lh * Shp).mean(axis=1))
    parts = dict(p1=p1, p2=p2, ph2=ph2, dp2=dp2, dph2=dph2, Lh=Lh, dLh=dLh,
                 a2=a2, da2=da2, ah=ah, dah=dah, S2=S2, S2p=S2p, Sh=Sh, Shp=Shp,
                 pk=pk, pk1=pk1, pk2=pk2, X=X, Xp=Xp, Y=Y, Yp=Yp)
    return Q, dQ, parts


def _sample_field(fld, t, p, plan, need_dx: bool):
    t = np.asarray(t, dtype=float)
    p1, p2, ph2 = _geometry(p, plan)
    t1 = np.broadcast_to(t[:, None], p1.shape)
    t2 = np.broadcast_to(t[:, None, None], p2.shape)
    vals = [fld.value(t1, p1), None, fld.value(t2, p2), None, fld.value(t2, ph2), None]
    if need_dx:
        vals[1], vals[3], vals[5] = fld.d_dx(t1, p1), fld.d_dx(t2, p2), fld.d_dx(t2, ph2)
    else:
        vals[1], vals[3], vals[5] = (np.zeros_like(vals[0]), np.zeros_like(vals[2]),
                                     np.zeros_like(vals[4]))
    return vals


def collision_and_derivative(field, t, p, plan: WKESamplePlan, chunk: int = 64,
                             need_dx: bool = True):
    fld = as_field(field)
    t, p = np.broadcast_arrays(np.atleast_1d(np.asarray(t, float)),
                               np.atleast_1d(np.asarray(p, float)))
    Q = np.empty(t.shape)
    dQ = np.empty(t.shape)
    for lo in range(0, t.size, chunk):
        sl = slice(lo, lo + chunk)
        Q[sl], dQ[sl], _ = _combine(p[sl], plan, *_sample_field(fld, t[sl], p[sl], plan, need_dx))
    return Q, dQ


def collision_qmc(field, t, p, plan: WKESamplePlan, chunk: int = 64):
    """Sobol estimate of the truncated collision term ``Q[g](t, p)``."""
    return collision_and_derivative(field, t, p, plan, chunk, need_dx=False)[0]


def residual(field, t, p, plan: WKESamplePlan):
    """``dg/dt - p dQ-hat/dp``."""
    fld = as_field(field)
    t, p = np.broadcast_arrays(np.atleast_1d(np.asarray(t, float)),
                               np.atleast_1d(np.asarray(p, float)))
    _, dQ = collision_and_derivative(fld, t, p, plan)
    return fld.d_dt(t, p) - p * dQ


def loss(field, plan: WKESamplePlan, batch=None) -> float:
    fld = as_field(field)
    W = plan.W if batch is None else plan.W[batch]
    r = residual(fld, W[:, 0], W[:, 1], plan)
    ic = fld.value(np.zeros_like(plan.W0), plan.W0) - g0(plan.W0)
    return float(np.mean(r ** 2) + np.mean(ic ** 2))


def initial_loss(field, plan: WKESamplePlan) -> float:
    fld = as_field(field)
    ic = fld.value(np.zeros_like(plan.W0), plan.W0) - g0(plan.W0)
    return float(np.mean(ic ** 2))


def _loss_points(t, p, w0, plan):
    p1, p2, ph2 = _geometry(p, plan)
    n, n1 = p1.shape
    n2 = p2.shape[-1]
    m = n * n1 * n2
    pts = [np.column_stack([t, p]),
           np.column_stack([np.repeat(t, n1), p1.ravel()]),
           np.column_stack([np.repeat(t, n1 * n2), p2.ravel()]),
           np.column_stack([np.repeat(t, n1 * n2), ph2.ravel()]),
           np.column_stack([np.zeros_like(w0), w0])]
    dirs = [np.tile([1.0, 0.0], (n, 1)),
            np.tile([0.0, 1.0], (n * n1 + 2 * m, 1)),
            np.zeros((len(w0), 2))]
    bounds = np.cumsum([0, n, n * n1, m, m, len(w0)])
    sl = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
    return np.concatenate(pts), np.concatenate(dirs), (n, n1, n2), sl


def loss_and_grad(params: NetworkParameters, plan: WKESamplePlan, batch=None,
                  ic_only: bool = False, chunk: int = 32768):
    """Semi-discrete loss on residual rows ``batch`` plus the initial term, with gradient.

    ``ic_only`` drops the residual term (used to pre-fit the initial data).
    """
    W = plan.W if batch is None else plan.W[batch]
    if ic_only:
        W = W[:0]
    t, p = W[:, 0], W[:, 1]
    inputs, dirs, (n, n1, n2), (s_c, s_1, s_2, s_h, s_0) = _loss_points(t, p, plan.W0, plan)
    u1 = plan.u1
    k = plan.k
    target = g0(plan.W0)
    n0 = len(plan.W0)

    def objective(val, tan):
        vbar = np.zeros_like(val)
        tbar = np.zeros_like(tan)
        ic = val[s_0] - target
        J = np.mean(ic ** 2)
        vbar[s_0] = 2.0 * ic / n0
        if n == 0:
            return J, vbar, tbar
        G1 = val[s_1].reshape(n, n1)
        G1x = tan[s_1].reshape(n, n1)
        G2 = val[s_2].reshape(n, n1, n2)
        G2x = tan[s_2].reshape(n, n1, n2)
        H2 = val[s_h].reshape(n, n1, n2)
        H2x = tan[s_h].reshape(n, n1, n2)
        _, dQ, q = _combine(p, plan, G1, G1x, G2, G2x, H2, H2x)
        r = tan[s_c] - p * dQ
        J = J + np.mean(r ** 2)

        rbar = 2.0 * r / n
        tbar[s_c] = rbar
        pp = p[:, None]
        c = (-p * rbar)[:, None] / n1
        Lh, dLh, S2, S2p, Sh, Shp = q["Lh"], q["dLh"], q["S2"], q["S2p"], q["Sh"], q["Shp"]
        X, Xp, Y, Yp = q["X"], q["Xp"], q["Y"], q["Yp"]

        Xbar = -2.0 * c * (S2 + pp * S2p)
        Xpbar = -2.0 * c * pp * S2
        S2bar = -2.0 * c * (X + pp * Xp)
        S2pbar = -2.0 * c * pp * X
        Ybar = c * (Lh * Sh + pp * (dLh * Sh + Lh * Shp))
        Ypbar = c * pp * Lh * Sh
        Shbar = c * (Y * Lh + pp * (Yp * Lh + Y * dLh))
        Shpbar = c * pp * Y * Lh

        p1 = q["p1"]
        G1bar = (Xbar * q["pk"] + Xpbar * _pw(p1, k - 1.0, k) * u1
                 + Ybar * q["pk1"] + Ypbar * q["pk2"] * u1)
        G1xbar = Xpbar * q["pk"] * u1 + Ypbar * q["pk1"] * u1
        vbar[s_1] = G1bar.ravel()
        tbar[s_1] = G1xbar.ravel()

        vbar[s_2] = ((S2bar[:, :, None] * q["a2"] + S2pbar[:, :, None] * q["da2"] * q["dp2"])
                     / n2).ravel()
        tbar[s_2] = (S2pbar[:, :, None] * q["a2"] * q["dp2"] / n2).ravel()
        vbar[s_h] = ((Shbar[:, :, None] * q["ah"] + Shpbar[:, :, None] * q["dah"] * q["dph2"])
                     / n2).ravel()
        tbar[s_h] = (Shpbar[:, :, None] * q["ah"] * q["dph2"] / n2).ravel()
        return J, vbar, tbar

    return objective_gradient(params, inputs, dirs, objective, chunk=chunk)


class WKEProblem:
    """Training adapter over the rows of ``plan.W``."""

    def __init__(self, plan: WKESamplePlan, ic_only: bool = False, chunk: int = 32768):
        self.plan = plan
        self.ic_only = ic_only
        self.chunk = chunk

    @property
    def n_samples(self) -> int:
        return 1 if self.ic_only else len(self.plan.W)

    def loss_and_grad(self, params, batch=None):
        return loss_and_grad(params, self.plan, batch, self.ic_only, self.chunk)

    def loss(self, params) -> float:
        if self.ic_only:
            return initial_loss(params, self.plan)
        return loss(params, self.plan)


def predict(field, t, p, R: float):
    """Field values with a flag marking wavenumbers outside ``[0, R]``."""
    fld = as_field(field)
    t, p = np.broadcast_arrays(np.asarray(t, float), np.asarray(p, float))
    return fld.value(t, p), p > R
