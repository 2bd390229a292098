"""End-to-end experiment runners used by the command line and the scripts.

Each runner takes an :class:`~wavekin.config.ExperimentConfig`, writes its
artifacts plus ``manifest.json`` into ``output_dir`` and returns a summary
dict. Outputs contain no timestamps, so identical configs give identical files.
"""
from __future__ import annotations

import json
import logging
import platform
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis, fvs, lowdisc, sce, wke
from .config import ExperimentConfig
from .errors import DivergenceError, DomainError
from .field import init_params, load_checkpoint, save_checkpoint, evaluate
from .train import Stage, TrainingSchedule, train, write_history

log = logging.getLogger(__name__)

PACKAGE_VERSION = "0.1.0"


@dataclass
class Snap:
    t: float
    x: np.ndarray
    values: np.ndarray


def _outdir(exp: ExperimentConfig) -> Path:
    out = Path(exp.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def versions() -> dict:
    import scipy
    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "wavekin": PACKAGE_VERSION}


def write_manifest(out: Path, exp: ExperimentConfig, artifacts, summary: dict,
                   status: str = "ok") -> Path:
    doc = {"format": "wavekin manifest v1", "status": status, "config": exp.to_dict(),
           "seed": exp.seed, "versions": versions(), "artifacts": sorted(artifacts),
           "summary": _jsonable(summary)}
    path = out / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _train(exp, params, schedule, out: Path):
    try:
        return train(params, schedule, callback=_progress)
    except DivergenceError as exc:
        write_history(out / "history.csv", exc.history)
        write_manifest(out, exp, ["history.csv"], {"error": str(exc)}, status="diverged")
        raise


def _progress(stage, epoch, row):
    if epoch % 100 == 0:
        log.info("%s epoch %d loss %.4e", stage.name, epoch, row[3])


# ---------------------------------------------------------------- SCE

def run_sce_train(exp: ExperimentConfig) -> dict:
    c = exp.params
    out = _outdir(exp)
    plan = sce.build_plan(c.sce_config())
    params = init_params(exp.seed, scheme=c.init).astype(c.dtype)
    schedule = TrainingSchedule([Stage("sce", sce.SCEProblem(plan), c.epochs)],
                                batch_size=c.batch_size, lr=c.lr)
    res = _train(exp, params, schedule, out)
    P = res.params.astype(np.float64)

    save_checkpoint(out / "checkpoint.txt", P, exp.seed)
    write_history(out / "history.csv", res.history)

    grid = np.sort(sce.sup_error_grid(c.R, c.n_error))
    rows = []
    for t in c.snapshot_times:
        nn = evaluate(P, t, grid)
        exact = sce.analytic_m(t, grid)
        rows += [(float(t), float(v), float(a), float(b)) for v, a, b in zip(grid, nn, exact)]
    analysis.write_table_csv(out / "snapshots.csv", "sce snapshots", ("t", "v", "m_nn", "m_exact"),
                             rows)

    ext = c.extrapolation_R * lowdisc.sobol_points(1, c.n_extrapolation)[:, 0]
    reports = []
    for t in c.snapshot_times:
        reports.append(analysis.sup_error(P, sce.analytic_m, t, grid,
                                          f"sobol[0,{c.R:g}]x{len(grid)}"))
    for t in c.snapshot_times:
        reports.append(analysis.sup_error(P, sce.analytic_m, t, ext,
                                          f"sobol[0,{c.extrapolation_R:g}]x{len(ext)}"))
    analysis.write_errors_csv(out / "errors.csv", reports)

    n = len(c.snapshot_times)
    summary = {"best_loss": res.best_loss, "initial_loss": res.history[0][4],
               "sup_error": {f"{r.time:g}": r.sup_error for r in reports[:n]},
               "extrapolation_error": {f"{r.time:g}": r.sup_error for r in reports[n:]}}
    artifacts = ["checkpoint.txt", "history.csv", "snapshots.csv", "errors.csv", "manifest.json"]
    write_manifest(out, exp, artifacts, summary)
    summary.update(params=P, reports=reports, history=res.history)
    return summary


# ---------------------------------------------------------------- WKE

def wke_energy_times(c) -> np.ndarray:
    n = int(round(c.energy_t_max / c.energy_dt))
    return c.energy_dt * np.arange(1, n + 1)


def run_wke_train(exp: ExperimentConfig) -> dict:
    c = exp.params
    out = _outdir(exp)
    cfg = c.wke_config()
    stages = []
    for T_s, epochs in zip(c.stages, c.epochs):
        plan = wke.build_plan(cfg, T=T_s)
        stages.append(Stage(f"T={T_s:g}", wke.WKEProblem(plan), int(epochs)))
    params = init_params(exp.seed, scheme=c.init).astype(c.dtype)
    schedule = TrainingSchedule(stages, batch_size=c.batch_size, eval_every=c.eval_every, lr=c.lr)
    res = _train(exp, params, schedule, out)
    P = res.params.astype(np.float64)

    artifacts = ["checkpoint.txt", "history.csv", "energy.csv", "snapshots.csv",
                 "large_p.csv", "energy.svg", "manifest.json"]
    save_checkpoint(out / "checkpoint.txt", P, exp.seed)
    for name, sp in res.stage_params.items():
        fname = f"checkpoint_{name.replace('=', '')}.txt"
        save_checkpoint(out / fname, sp.astype(np.float64), exp.seed)
        artifacts.append(fname)
    write_history(out / "history.csv", res.history)

    series = analysis.energy_series(P, wke_energy_times(c), c.R)
    analysis.write_energy_csv(out / "energy.csv", series)
    x = np.linspace(0.0, c.R, c.n_snapshot)
    snaps = [Snap(float(t), x, evaluate(P, t, x)) for t in c.snapshot_times]
    analysis.write_snapshots_csv(out / "snapshots.csv", snaps)

    big = np.concatenate([np.linspace(0.0, c.R, 101)[:-1],
                          np.logspace(np.log10(c.R), np.log10(c.large_p_max), 101)])
    rows = []
    for t in c.snapshot_times:
        vals, outside = wke.predict(P, np.full_like(big, t), big, c.R)
        rows += [(float(t), float(p), float(g), int(o)) for p, g, o in zip(big, vals, outside)]
    analysis.write_table_csv(out / "large_p.csv", "wke large-p prediction",
                             ("t", "p", "g", "outside_training_domain"), rows)
    analysis.svg_lines(out / "energy.svg", [("NN", series.times, series.energies)],
                       "total energy on [0,R]", logx=True, logy=True)

    summary = {"stage_best": res.stage_best, "positivity": _positivity(snaps),
               "selected_stage": min(res.stage_best, key=res.stage_best.get)}
    try:
        summary["slope"] = analysis.decay_slope(series)
    except (ValueError, ArithmeticError) as exc:
        summary["slope"] = str(exc)
    write_manifest(out, exp, artifacts, summary)
    summary.update(params=P, series=series, snapshots=snaps, history=res.history)
    return summary


def _positivity(snaps, rel: float = 0.02) -> dict:
    gmax = max(float(np.max(s.values)) for s in snaps)
    gmin = min(float(np.min(s.values)) for s in snaps)
    return {"min": gmin, "max": gmax, "ok": bool(gmin >= -rel * gmax)}


# ---------------------------------------------------------------- FVS

def run_fvs(exp: ExperimentConfig) -> dict:
    c = exp.params
    out = _outdir(exp)
    artifacts = ["snapshots.csv", "energy.csv", "positivity.txt", "energy.svg", "manifest.json"]
    status, err = "ok", None
    try:
        r = fvs.run(c.h, c.R, c.dt, c.t_final, wke.g0, c.snapshot_times, c.gamma,
                    gain_domain=c.gain_domain)
    except fvs.InstabilityError as exc:
        status, err, r = "unstable", exc, exc.partial
        last = exc.last_stable
        analysis.write_snapshots_csv(out / "last_stable.csv",
                                     [Snap(last.t, r.grid.pivots, last.g)])
        artifacts.append("last_stable.csv")

    analysis.write_snapshots_csv(out / "snapshots.csv", r.snapshots)
    series = analysis.EnergySeries(r.times, r.energies, "fvs")
    analysis.write_energy_csv(out / "energy.csv", series)
    lines = ["# wavekin positivity report v1",
             f"cells {r.grid.M}",
             f"first_failure_step {r.first_failure_step if r.first_failure_step is not None else 'none'}",
             f"first_failure_time {r.first_failure_step * c.dt if r.first_failure_step is not None else 'none'}",
             f"min_value {r.min_value!r}",
             f"status {status}"]
    if err is not None:
        lines.append(f"abort {err}")
    (out / "positivity.txt").write_text("\n".join(lines) + "\n")
    pos = r.energies > 0
    analysis.svg_lines(out / "energy.svg", [("FVS", r.times[pos], r.energies[pos])],
                       "total energy on [0,R]", logx=True, logy=True)

    summary = {"cells": r.grid.M, "first_failure_step": r.first_failure_step,
               "min_value": r.min_value, "initial_energy": float(r.energies[0]),
               "steps": len(r.times) - 1}
    if c.t_final >= analysis.DEFAULT_WINDOW[1] and err is None:
        summary["slope"] = analysis.decay_slope(series)
    write_manifest(out, exp, artifacts, summary, status=status)
    if err is not None:
        raise err
    summary.update(run=r, series=series)
    return summary


# ---------------------------------------------------------------- post-processing

def run_analyze(exp: ExperimentConfig) -> dict:
    c = exp.params
    out = _outdir(exp)
    rows, lines, fits = [], [], {}
    for path in c.energy_csv:
        s = analysis.read_energy_csv(path)
        try:
            slope, icpt, r2 = analysis.decay_slope(s, tuple(c.window))
            note = ""
        except (ValueError, DomainError) as exc:
            # a series without a valid fit is reported, not fatal
            slope = icpt = r2 = float("nan")
            note = str(exc)
        rows.append((str(path), s.method, slope, icpt, r2, float(c.reference_slope), note))
        pos = (s.times > 0) & (s.energies > 0)
        lines.append((f"{s.method}: {Path(path).parent.name}", s.times[pos], s.energies[pos]))
        fits[str(path)] = {"method": s.method, "slope": slope, "intercept": icpt, "r2": r2,
                           "note": note}
    analysis.write_table_csv(out / "slopes.csv", "decay slopes",
                             ("source", "method", "slope", "intercept", "r2", "reference", "note"), rows)
    artifacts = ["slopes.csv", "manifest.json"]
    if c.plot:
        t_ref = np.geomspace(max(c.window[0], 1e-3), c.window[1], 50)
        t0, e0 = lines[0][1], lines[0][2]
        anchor = e0[min(np.searchsorted(t0, c.window[0]), len(e0) - 1)] if len(e0) else 1.0
        ref = anchor * (t_ref / t_ref[0]) ** c.reference_slope
        analysis.svg_lines(out / "energy.svg", lines + [("t^-1/2", t_ref, ref)],
                           "total energy (log-log)", logx=True, logy=True)
        artifacts.append("energy.svg")
    write_manifest(out, exp, artifacts, {"fits": fits})
    return {"fits": fits}


def nn_snapshots(params, times, R: float, n: int):
    x = np.linspace(0.0, R, n)
    return [Snap(float(t), x, evaluate(params, t, x)) for t in times]


def run_compare(exp: ExperimentConfig) -> dict:
    c = exp.params
    out = _outdir(exp)
    P = load_checkpoint(c.checkpoint)
    ref = analysis.read_snapshots_csv(c.fvs_snapshots)
    nn = nn_snapshots(P, c.times, c.R, c.n_grid)
    rows = analysis.compare_nn_fvs(nn, ref, c.times)
    analysis.write_comparison_csv(out / "comparison.csv", rows)
    artifacts = ["comparison.csv", "manifest.json"]
    if c.plot:
        lines = []
        for s in nn:
            b = analysis.match_snapshot(ref, s.t)
            lines += [(f"NN t={s.t:g}", s.x, s.values), (f"FVS t={s.t:g}", b.x, b.values)]
        analysis.svg_lines(out / "snapshots.svg", lines, "NN vs FVS snapshots")
        artifacts.append("snapshots.svg")
    summary = {f"{r.time:g}": {"rel_l2": r.rel_l2, "l2": r.l2, "sup": r.sup} for r in rows}
    write_manifest(out, exp, artifacts, summary)
    return {"rows": rows}


RUNNERS = {"sce": run_sce_train, "wke": run_wke_train, "fvs": run_fvs,
           "analyze": run_analyze, "compare": run_compare}
