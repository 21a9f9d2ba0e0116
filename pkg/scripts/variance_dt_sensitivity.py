"""Side table: sensitivity of the windowed variance of C to the sampling step.

Runs the Dicke variance sweep over a narrow energy band for several time steps
and prints sigma^2_C per window, one column per step.
"""
import argparse

import numpy as np

from esqpt.experiments import PRESETS, run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", default="sweep-dicke")
    ap.add_argument("--steps", type=float, nargs="+", default=[1.0, 10.0, 100.0])
    ap.add_argument("--lo", type=float, default=-1.4)
    ap.add_argument("--hi", type=float, default=-1.2)
    ap.add_argument("--cache-dir", default=None)
    args = ap.parse_args()

    base = PRESETS[args.preset].replace(energy_range=(args.lo, args.hi), cache_dir=args.cache_dir)
    table = {}
    for dt in args.steps:
        rec = run(base.replace(time_step=dt))
        starts = rec.column("variance", "window_start")
        e = rec.column("variance", "reduced_energy")
        v = rec.column("variance", "sigma2_C")
        for s, r, x in zip(starts, e, v):
            table.setdefault(int(s), [r])
            table[int(s)].append(x)
    print("# window_start reduced_energy " + " ".join(f"sigma2_C(dt={dt:g})" for dt in args.steps))
    for s in sorted(table):
        row = table[s]
        print(f"{s} {row[0]:.5f} " + " ".join(f"{x:.3e}" for x in row[1:]))
    v = np.array([table[s][1:] for s in sorted(table)])
    print("# max per step: " + " ".join(f"{x:.3e}" for x in v.max(axis=0)))


if __name__ == "__main__":
    main()
