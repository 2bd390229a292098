"""Scan the truncation R on the coarse mesh (h = 0.8, dt = 0.005) for loss of positivity.

    python scripts/frontier_scan.py [--t-final 20] [--R 150 180 200 250 300 400]

Also prints the largest per-step loss coefficient ``2 p dt (2 C + w)``.
A value below one is sufficient for the explicit update to keep every cell
non-negative; above one, a cell that holds energy can overshoot past zero.
"""
import argparse

import numpy as np

from wavekin import fvs, wke


def loss_coefficient(g, grid, dt):
    w = fvs.weights(g, grid)
    C = np.cumsum(w)
    return float(np.max(2.0 * grid.pivots * dt * (2.0 * C + w)))


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--h", type=float, default=0.8)
    ap.add_argument("--dt", type=float, default=0.005)
    ap.add_argument("--t-final", type=float, default=20.0)
    ap.add_argument("--R", type=float, nargs="+", default=[150, 180, 200, 250, 300, 400])
    args = ap.parse_args()
    for R in args.R:
        grid = fvs.build_grid(args.h, R)
        coeff = loss_coefficient(fvs.project_initial(wke.g0, grid).g, grid, args.dt)
        try:
            r = fvs.run(args.h, R, args.dt, args.t_final, wke.g0)
            status = "completed"
        except fvs.InstabilityError as exc:
            r, status = exc.partial, f"aborted ({exc})"
        first = r.first_failure_step
        where = "none" if first is None else f"step {first} (t={first * args.dt:g})"
        print(f"R={R:g}: M={grid.M} initial loss coefficient {coeff:.2f}, "
              f"first negative {where}, min {r.min_value:.2e}, {status}")


if __name__ == "__main__":
    main()
