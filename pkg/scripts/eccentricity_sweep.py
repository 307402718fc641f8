#!/usr/bin/env python3
"""Sweep eccentricity and record how the near-circle structure degrades.

For each e on a grid this measures:
  * the fitted mode-deviation constant C*(e) = max_q q sup|c_q - cos 2 pi q x|
  * the operator identity gap ||L_N - Id||_2
  * the worst chart conjugacy residual over a q range
  * the empirical perimeter-defect constant defect / ||n||_C1^2 at q = 3

Writes sweep.csv and sweep.svg into --out.
"""

import argparse
import sys

import numpy as np

from caustica.action_angle import conjugacy_residual, get_chart
from caustica.geometry import EllipsePose, PerturbationSeries
from caustica.modes import deformed_mode, operator_report
from caustica.report_io import data_to_csv, svg_plot
from caustica.variational import perimeter_defect
from pathlib import Path


def sweep_point(e, N, q_modes, q_chart):
    pose = EllipsePose(e)
    x = np.arange(2048) / 2048
    c_star = 0.0
    for q in q_modes:
        cq, _ = deformed_mode(pose, q)
        c_star = max(c_star, q * float(np.max(np.abs(
            cq.samples - np.cos(2 * np.pi * q * x)))))
    gap = operator_report(pose, N).gap if e > 0 else 0.0
    conj = max(conjugacy_residual(get_chart(pose, q), n_theta=16)
               for q in q_chart)
    v = PerturbationSeries.single_cos(5, 1.0)
    reports, _ = perimeter_defect(pose, v, 3, [3e-4], np.arange(32) / 32)
    defect_const = reports[0].defect / reports[0].epsilon ** 2
    return {"e": e, "c_star": c_star, "operator_gap": gap,
            "conjugacy_residual": conj, "defect_constant": defect_const}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="reports")
    ap.add_argument("--emax", type=float, default=0.5)
    ap.add_argument("--steps", type=int, default=11)
    ap.add_argument("--N", type=int, default=32)
    args = ap.parse_args()

    rows = []
    for e in np.linspace(0.0, args.emax, args.steps):
        row = sweep_point(round(float(e), 6), args.N, (3, 5, 9, 17),
                          (3, 5, 8))
        rows.append(row)
        print(" ".join(f"{k}={v:.3e}" if isinstance(v, float) else f"{k}={v}"
                       for k, v in row.items()))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(data_to_csv(rows))
    es = [r["e"] for r in rows]
    svg = svg_plot({
        "C*": (es, [max(r["c_star"], 1e-16) for r in rows]),
        "gap": (es, [max(r["operator_gap"], 1e-16) for r in rows]),
        "defect/eps^2": (es, [max(r["defect_constant"], 1e-16) for r in rows]),
    }, "eccentricity sweep", "e", "value")
    (out / "sweep.svg").write_text(svg)
    print(f"wrote {out / 'sweep.csv'} and {out / 'sweep.svg'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
