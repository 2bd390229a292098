"""Dense sigmoid network n(t, x; theta) with exact input and parameter derivatives.

Every evaluation point carries one tangent direction ``d = (d_t, d_x)``; the
forward pass returns the value and the directional derivative ``grad n . d``.
The reverse pass takes cotangents for both outputs and returns the exact
parameter gradient, so objectives that contain first input-derivatives of the
network (PDE residuals) can be differentiated without finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import expit

from .errors import NumericError

DEFAULT_WIDTHS = (2, 128, 128, 1)
CHECKPOINT_VERSION = 1


@dataclass
class NetworkParameters:
    """Weights ``(fan_out, fan_in)`` and biases for each layer, output layer last."""

    weights: list
    biases: list

    @property
    def widths(self) -> tuple:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def dtype(self):
        return self.weights[0].dtype

    def size(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def ravel(self) -> np.ndarray:
        """Flat vector in the order W1, b1, W2, b2, ..., W_out, b_out (row-major)."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, flat: np.ndarray, widths: Sequence[int]) -> "NetworkParameters":
        flat = np.asarray(flat)
        weights, biases, pos = [], [], 0
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            weights.append(flat[pos:pos + fan_in * fan_out].reshape(fan_out, fan_in).copy())
            pos += fan_in * fan_out
            biases.append(flat[pos:pos + fan_out].copy())
            pos += fan_out
        if pos != flat.size:
            raise ValueError(f"flat vector has {flat.size} entries, widths need {pos}")
        return cls(weights, biases)

    def astype(self, dtype) -> "NetworkParameters":
        return NetworkParameters([w.astype(dtype) for w in self.weights],
                                 [b.astype(dtype) for b in self.biases])

    def zeros_like(self) -> "NetworkParameters":
        return NetworkParameters([np.zeros_like(w) for w in self.weights],
                                 [np.zeros_like(b) for b in self.biases])

    def copy(self) -> "NetworkParameters":
        return self.astype(self.dtype)


def param_count(widths: Sequence[int]) -> int:
    return sum(a * b + b for a, b in zip(widths[:-1], widths[1:]))


def init_params(seed: int, widths: Sequence[int] = DEFAULT_WIDTHS,
                scheme: str = "normal") -> NetworkParameters:
    """Draw every weight and bias i.i.d. from a seeded generator.

    ``scheme="normal"`` uses N(0, 1) for all entries. ``scheme="scaled"``
    divides the weight draws by ``sqrt(fan_in)`` and zeroes the biases.
    """
    if scheme not in ("normal", "scaled"):
        raise ValueError(f"unknown init scheme {scheme!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        w = rng.standard_normal((fan_out, fan_in))
        b = rng.standard_normal(fan_out)
        if scheme == "scaled":
            w /= np.sqrt(fan_in)
            b[:] = 0.0
        weights.append(w)
        biases.append(b)
    return NetworkParameters(weights, biases)


def zero_params(widths: Sequence[int] = DEFAULT_WIDTHS) -> NetworkParameters:
    return init_params(0, widths).zeros_like()


@dataclass
class EvalRecord:
    value: float
    d_dt: float
    d_dx: float


@dataclass
class _Cache:
    inputs: np.ndarray
    directions: np.ndarray
    acts: list      # a_0 .. a_L
    tans: list      # tangent of a_0 .. a_L
    dsig: list      # sigma'(z_l), l = 1..L
    ztans: list     # tangent of z_l, l = 1..L
    sig: list       # sigma(z_l) (== a_l), kept for sigma''


def _check(z: np.ndarray, layer: int) -> None:
    if not np.isfinite(z.sum()):
        raise NumericError(f"non-finite pre-activation in layer {layer}")


def forward_batch(params: NetworkParameters, inputs: np.ndarray,
                  directions: Optional[np.ndarray] = None, keep: bool = False):
    """Evaluate the network at ``inputs`` (shape ``(N, 2)``, columns ``t, x``).

    Returns ``(value, tangent)`` (or ``(value, tangent, cache)`` when ``keep``),
    where ``tangent[k]`` is the derivative of the output at ``inputs[k]`` along
    ``directions[k]``. Without directions only values are computed and the
    tangent is ``None``.
    """
    dtype = params.dtype
    a = np.asarray(inputs, dtype=dtype)
    with_tan = directions is not None
    da = np.asarray(directions, dtype=dtype) if with_tan else None
    acts, tans, dsig, ztans = [a], [da], [], []
    n_hidden = len(params.weights) - 1
    for layer in range(n_hidden):
        w, b = params.weights[layer], params.biases[layer]
        z = a @ w.T
        z += b
        _check(z, layer + 1)
        a = expit(z)
        acts.append(a)
        if with_tan:
            s1 = a * (1.0 - a)
            dz = da @ w.T
            da = s1 * dz
            dsig.append(s1)
            ztans.append(dz)
            tans.append(da)
    w_out, b_out = params.weights[-1], params.biases[-1]
    value = (a @ w_out.T)[:, 0] + b_out[0]
    _check(value, n_hidden + 1)
    tangent = (da @ w_out.T)[:, 0] if with_tan else None
    if keep:
        return value, tangent, _Cache(inputs, directions, acts, tans, dsig, ztans, acts[1:])
    return value, tangent


def backward_batch(params: NetworkParameters, cache: _Cache,
                   value_bar: np.ndarray, tangent_bar: Optional[np.ndarray] = None,
                   out: Optional[NetworkParameters] = None) -> NetworkParameters:
    """Accumulate the parameter gradient of ``sum(value_bar*value + tangent_bar*tangent)``."""
    if out is None:
        out = params.zeros_like()
    dtype = params.dtype
    vb = np.asarray(value_bar, dtype=dtype)[:, None]
    with_tan = tangent_bar is not None and cache.directions is not None
    n_hidden = len(params.weights) - 1
    w_out = params.weights[-1]

    a_L = cache.acts[-1]
    out.weights[-1] += vb.T @ a_L
    out.biases[-1] += vb.sum()
    abar = vb @ w_out
    if with_tan:
        tb = np.asarray(tangent_bar, dtype=dtype)[:, None]
        out.weights[-1] += tb.T @ cache.tans[-1]
        dabar = tb @ w_out
    for layer in range(n_hidden - 1, -1, -1):
        w = params.weights[layer]
        s = cache.sig[layer]
        if with_tan:
            s1 = cache.dsig[layer]
            dzbar = dabar * s1
            s1bar = dabar * cache.ztans[layer]
            # sigma'' = sigma' (1 - 2 sigma)
            zbar = s1 * (abar + s1bar * (1.0 - 2.0 * s))
        else:
            zbar = abar * (s * (1.0 - s))
        out.weights[layer] += zbar.T @ cache.acts[layer]
        out.biases[layer] += zbar.sum(axis=0)
        if with_tan:
            out.weights[layer] += dzbar.T @ cache.tans[layer]
        if layer > 0:
            abar = zbar @ w
            if with_tan:
                dabar = dzbar @ w
    return out


def forward(params: NetworkParameters, t: float, x: float) -> EvalRecord:
    """Value and both first partial derivatives at a single point."""
    inp = np.array([[t, x], [t, x]], dtype=float)
    dirs = np.array([[1.0, 0.0], [0.0, 1.0]])
    value, tan = forward_batch(params, inp, dirs)
    return EvalRecord(float(value[0]), float(tan[0]), float(tan[1]))


def evaluate(params: NetworkParameters, t, x, chunk: int = 65536) -> np.ndarray:
    """Network values on broadcast ``(t, x)`` arrays, evaluated in chunks."""
    t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
    inp = np.stack([t.ravel(), x.ravel()], axis=1)
    out = np.empty(len(inp))
    for lo in range(0, len(inp), chunk):
        out[lo:lo + chunk] = forward_batch(params, inp[lo:lo + chunk])[0]
    return out.reshape(t.shape)


Objective = Callable[[np.ndarray, np.ndarray], tuple]


def objective_gradient(params: NetworkParameters, inputs: np.ndarray,
                       directions: np.ndarray, objective: Objective,
                       chunk: int = 32768):
    """Exact gradient of a scalar objective built from network evaluations.

    ``objective(values, tangents)`` must return ``(J, dJ/dvalues, dJ/dtangents)``.
    The network is evaluated at every row of ``inputs`` with its tangent along
    the matching row of ``directions``. Returns ``(J, grad)``.

    Chunks are processed in index order so the reduction is reproducible; when
    the point set exceeds ``chunk`` the forward pass is recomputed during the
    reverse sweep instead of holding every activation in memory.
    """
    n = len(inputs)
    if n <= chunk:
        value, tangent, cache = forward_batch(params, inputs, directions, keep=True)
        J, vbar, tbar = objective(value, tangent)
        grad = backward_batch(params, cache, vbar, tbar)
    else:
        value = np.empty(n, dtype=params.dtype)
        tangent = np.empty(n, dtype=params.dtype)
        for lo in range(0, n, chunk):
            v, tn = forward_batch(params, inputs[lo:lo + chunk], directions[lo:lo + chunk])
            value[lo:lo + chunk] = v
            tangent[lo:lo + chunk] = tn
        J, vbar, tbar = objective(value, tangent)
        grad = params.zeros_like()
        for lo in range(0, n, chunk):
            sl = slice(lo, lo + chunk)
            _, _, cache = forward_batch(params, inputs[sl], directions[sl], keep=True)
            backward_batch(params, cache, vbar[sl], tbar[sl], out=grad)
    flat = grad.ravel()
    if not np.all(np.isfinite(flat)):
        raise NumericError("non-finite entries in parameter gradient")
    return float(J), grad


def save_checkpoint(path, params: NetworkParameters, seed: Optional[int] = None) -> None:
    widths = " ".join(str(w) for w in params.widths)
    header = (f"wavekin-params version {CHECKPOINT_VERSION}\n"
              f"widths {widths}\n"
              f"seed {seed if seed is not None else 'none'}\n"
              "order W1 b1 W2 b2 ... Wout bout, weights row-major (fan_out, fan_in)")
    np.savetxt(path, params.ravel().astype(np.float64), fmt="%.17g", header=header)


def load_checkpoint(path) -> NetworkParameters:
    widths = None
    with Path(path).open() as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            parts = line[1:].split()
            if parts and parts[0] == "widths":
                widths = tuple(int(p) for p in parts[1:])
            if parts and parts[0] == "wavekin-params" and int(parts[2]) != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {parts[2]}")
    if widths is None:
        raise ValueError(f"{path}: checkpoint header lacks widths")
    return NetworkParameters.from_flat(np.loadtxt(path, ndmin=1), widths)


class NetworkField:
    """Adapter giving a parameter set the ``value / d_dt / d_dx`` interface."""

    def __init__(self, params: NetworkParameters, chunk: int = 65536):
        self.params = params
        self.chunk = chunk

    def value(self, t, x):
        return evaluate(self.params, t, x, self.chunk)

    def _directional(self, t, x, direction):
        t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
        inp = np.stack([t.ravel(), x.ravel()], axis=1)
        dirs = np.broadcast_to(np.asarray(direction, float), inp.shape)
        out = np.empty(len(inp))
        for lo in range(0, len(inp), self.chunk):
            sl = slice(lo, lo + self.chunk)
            out[sl] = forward_batch(self.params, inp[sl], dirs[sl])[1]
        return out.reshape(t.shape)

    def d_dt(self, t, x):
        return self._directional(t, x, (1.0, 0.0))

    def d_dx(self, t, x):
        return self._directional(t, x, (0.0, 1.0))


class FunctionField:
    """A field given as a plain function ``f(t, x)``.

    Missing partial derivatives fall back to central differences with
    step ``fd_step``; pass exact ones when the function has them.
    """

    def __init__(self, f, d_dt=None, d_dx=None, fd_step: float = 1e-6):
        self.f = f
        self._dt = d_dt
        self._dx = d_dx
        self.h = fd_step

    def value(self, t, x):
        t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
        return np.asarray(self.f(t, x), dtype=float) * np.ones_like(t)

    def d_dt(self, t, x):
        if self._dt is not None:
            return self._dt(*np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float)))
        return (self.value(np.asarray(t) + self.h, x) - self.value(np.asarray(t) - self.h, x)) / (2 * self.h)

    def d_dx(self, t, x):
        if self._dx is not None:
            return self._dx(*np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float)))
        return (self.value(t, np.asarray(x) + self.h) - self.value(t, np.asarray(x) - self.h)) / (2 * self.h)


def constant_field(c: float) -> FunctionField:
    zero = lambda t, x: np.zeros_like(t)
    return FunctionField(lambda t, x: np.full_like(t, c), d_dt=zero, d_dx=zero)


def as_field(obj):
    if isinstance(obj, NetworkParameters):
        return NetworkField(obj)
    if isinstance(obj, (NetworkField, FunctionField)):
        return obj
    if callable(obj):
        return FunctionField(obj)
    raise TypeError(f"cannot interpret {type(obj).__name__} as a field")
