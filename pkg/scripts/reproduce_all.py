"""Run the benchmark experiments from ``configs/`` and print their headline numbers.

    python scripts/reproduce_all.py [--full] [--only sce,fvs,wke,frontier]

``--full`` trains the WKE network with the full 2^15-sample budget
(several hours); the default uses the reduced 2^12 profile.
"""
import argparse
import logging
from pathlib import Path

from wavekin import config, experiments, fvs

ROOT = Path(__file__).resolve().parent.parent
CFG = ROOT / "configs"


def sce():
    s = experiments.run_sce_train(config.load("sce", CFG / "sce_benchmark.toml"))
    print("SCE sup error on [0,8]:", {k: round(v, 4) for k, v in s["sup_error"].items()})
    print("SCE sup error on [0,1000]:", {k: round(v, 4) for k, v in s["extrapolation_error"].items()})


def fvs_reference():
    s = experiments.run_fvs(config.load("fvs", CFG / "fvs_reference.toml"))
    print(f"FVS h=0.01: E0={s['initial_energy']:.8f} first negative step={s['first_failure_step']} "
          f"slope={s['slope'][0]:.3f}")


def frontier():
    for R in (250, 400):
        exp = config.load("fvs", CFG / f"fvs_frontier_{R}.toml")
        try:
            s = experiments.run_fvs(exp)
            print(f"FVS h=0.8 R={R}: first negative step={s['first_failure_step']} min={s['min_value']:.2e}")
        except fvs.InstabilityError as exc:
            print(f"FVS h=0.8 R={R}: first negative step={exc.partial.first_failure_step}, {exc}")


def wke(full: bool):
    name = "wke_full" if full else "wke_reduced"
    exp = config.load("wke", CFG / f"{name}.toml")
    s = experiments.run_wke_train(exp)
    print(f"WKE ({name}): stage losses {s['stage_best']} slope {s['slope']}")
    ref = ROOT / "out" / "fvs_reference" / "snapshots.csv"
    if ref.exists():
        cmp = config.load("compare", CFG / "post.toml")
        cmp.params.checkpoint = str(Path(exp.output_dir) / "checkpoint.txt")
        cmp.output_dir = f"out/compare_{name}"
        for r in experiments.run_compare(cmp)["rows"]:
            print(f"  t={r.time:g}: rel L2 vs FVS {r.rel_l2:.3f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--full", action="store_true")
    ap.add_argument("--only", default="sce,fvs,frontier,wke")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    jobs = {"sce": sce, "fvs": fvs_reference, "frontier": frontier, "wke": lambda: wke(args.full)}
    for key in args.only.split(","):
        jobs[key]()


if __name__ == "__main__":
    main()
