"""Weak density over the interval for a pre/post-selected pair, written as a (t, r) table.

Run with a weak-value scenario; the map shows where the real part turns
negative (anomalous values) as the overlap shrinks.

    python scripts/weak_value_map.py scenarios/weak_value.scn --samples 21 --out wv_map.csv
"""

import argparse

import numpy as np

from wickscft.scenario import seed_state, load_scenario
from wickscft.weakvalue import OrthogonalPostSelectionError, Selection, weak_density


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("scenario")
    ap.add_argument("--samples", type=int, default=11, help="number of evaluation times")
    ap.add_argument("--out", default="weak_value_map.csv")
    args = ap.parse_args()

    s = load_scenario(args.scenario)
    grid, units = s.grid, s.units
    v = s.potential(grid).evaluate(grid, units)
    sel = Selection(seed_state(s["selection"]["pre"], grid, v, units), seed_state(s["selection"]["post"], grid, v, units))
    table = s.time_table()
    stride = max(1, table.n_steps // (args.samples - 1))

    rows = []
    for m in range(0, table.n_steps + 1, stride):
        t = table.nodes[m]
        try:
            wv = weak_density(sel, v, table, t, s.n_particles, units)
        except OrthogonalPostSelectionError as exc:
            print(f"t = {t:.4f}: {exc}")
            continue
        rows += [(t, r, z.real, z.imag) for r, z in zip(grid.r, wv.values)]
        print(f"t = {t:.4f}  |overlap| = {abs(wv.overlap):.3e}  min Re = {wv.real.values.min():+.3e}")
    np.savetxt(args.out, np.array(rows), delimiter=",", header="t,r,re,im", comments="")
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
