"""ADAM minimisation of the semi-discrete loss functionals.

A *problem* is any object exposing

``n_samples``
    number of residual samples (rows that can be batched),
``loss_and_grad(params, batch)``
    loss on the residual rows ``batch`` (a slice or ``None`` for all) plus the
    initial-condition term, with the exact parameter gradient,
``loss(params)``
    full-set loss value.

Batches are contiguous index ranges of the sample set, visited in order.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DivergenceError, NumericError
from .field import NetworkParameters

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("stage", "epoch", "step", "batch_loss", "fullset_loss")


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size: int, **hyper) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), **hyper)


def adam_step(state: AdamState, theta: np.ndarray, grad: np.ndarray):
    """One bias-corrected ADAM update; returns ``(new_state, new_theta)``."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != theta.shape or grad.shape != state.m.shape:
        raise ValueError("shape mismatch between parameters, gradient and moments")
    if not np.all(np.isfinite(grad)):
        raise NumericError(f"non-finite gradient at step {state.step + 1}")
    step = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** step)
    v_hat = v / (1.0 - state.beta2 ** step)
    theta = theta - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, step=step), theta


@dataclass
class Stage:
    name: str
    problem: object
    epochs: int


@dataclass
class TrainingSchedule:
    stages: list
    batch_size: Optional[int] = None   # None: full batch
    eval_every: int = 1                # epochs between full-set evaluations (mini-batch)
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    divergence_factor: float = 1e6

    @property
    def total_epochs(self) -> int:
        return sum(s.epochs for s in self.stages)


@dataclass
class TrainResult:
    params: NetworkParameters
    history: list = field(default_factory=list)
    best_loss: float = math.inf
    stage_best: dict = field(default_factory=dict)
    stage_params: dict = field(default_factory=dict)


def batches(n: int, batch_size: Optional[int]):
    """Contiguous slices covering ``range(n)`` once; the last one may be short."""
    if batch_size is None or batch_size >= n:
        return [slice(0, n)]
    return [slice(lo, min(lo + batch_size, n)) for lo in range(0, n, batch_size)]


def train(params: NetworkParameters, schedule: TrainingSchedule,
          callback: Optional[Callable] = None) -> TrainResult:
    """Run every stage in order, fine-tuning the same parameters.

    Each stage starts from the best parameters of the previous one. The
    returned parameters have the lowest full-set loss recorded in any stage;
    ``stage_best`` and ``stage_params`` keep the optimum of every stage.
    """
    widths = params.widths
    dtype = params.dtype
    theta = params.ravel().astype(np.float64)
    state = AdamState.zeros(theta.size, lr=schedule.lr, beta1=schedule.beta1,
                            beta2=schedule.beta2, eps=schedule.eps)
    history = []
    result = TrainResult(params.copy(), history)
    step = 0

    def as_params(vec):
        return NetworkParameters.from_flat(vec.astype(dtype), widths)

    for stage in schedule.stages:
        prob = stage.problem
        best_loss, best_theta = math.inf, theta.copy()
        parts = batches(prob.n_samples, schedule.batch_size)
        full_batch = len(parts) == 1

        initial = prob.loss(as_params(theta))
        history.append((stage.name, 0, step, math.nan, initial))
        best_loss, best_theta = initial, theta.copy()
        limit = schedule.divergence_factor * max(initial, 1e-300)

        for epoch in range(1, stage.epochs + 1):
            for sl in parts:
                J, grad = prob.loss_and_grad(as_params(theta), sl)
                if not np.isfinite(J) or J > limit:
                    raise DivergenceError(
                        f"loss {J:.3e} exceeded {schedule.divergence_factor:g}x initial "
                        f"in stage {stage.name} epoch {epoch}", history)
                if full_batch and J < best_loss:
                    # J is the full-set loss of the parameters before this update
                    best_loss, best_theta = J, theta.copy()
                state, theta = adam_step(state, theta, grad.ravel())
                step += 1
                history.append((stage.name, epoch, step, J, J if full_batch else math.nan))
            if not full_batch and (epoch % schedule.eval_every == 0 or epoch == stage.epochs):
                full = prob.loss(as_params(theta))
                name, ep, st, bl, _ = history[-1]
                history[-1] = (name, ep, st, bl, full)
                if full < best_loss:
                    best_loss, best_theta = full, theta.copy()
            if callback is not None:
                callback(stage, epoch, history[-1])
        if full_batch and stage.epochs > 0:
            final = prob.loss(as_params(theta))
            history.append((stage.name, stage.epochs, step, math.nan, final))
            if final < best_loss:
                best_loss, best_theta = final, theta.copy()
        log.info("stage %s: best full-set loss %.4e", stage.name, best_loss)
        result.stage_best[stage.name] = best_loss
        result.stage_params[stage.name] = as_params(best_theta)
        theta = best_theta
        # the optimizer restarts on a fresh sample set
        state = AdamState.zeros(theta.size, lr=schedule.lr, beta1=schedule.beta1,
                                beta2=schedule.beta2, eps=schedule.eps)

    if result.stage_best:
        name = min(result.stage_best, key=result.stage_best.get)
        result.params = result.stage_params[name]
        result.best_loss = result.stage_best[name]
    return result


def write_history(path, history: Sequence) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write("# wavekin loss history v1\n")
        w = csv.writer(fh)
        w.writerow(HISTORY_COLUMNS)
        for row in history:
            w.writerow([row[0], row[1], row[2], repr(float(row[3])), repr(float(row[4]))])
