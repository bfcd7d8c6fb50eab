#!/usr/bin/env python3
"""Space and time refinement studies, printing the eoc tables."""
import sys

from nschfem.experiments import run_convergence


def show(tables):
    variables = list(tables)
    header = "k  " + "".join(f"{'err_' + v:>14s} {'eoc':>6s}" for v in variables)
    print(header)
    n_levels = len(tables[variables[0]].levels)
    for k in range(n_levels):
        row = f"{k + 1:<3d}"
        for v in variables:
            lvl = tables[v].levels[k]
            eoc = "  --  " if lvl.eoc is None else f"{lvl.eoc:6.2f}"
            row += f"{lvl.error:14.3e} {eoc}"
        print(row)


def main(mode="space", levels=None):
    levels = int(levels) if levels else (4 if mode == "space" else 3)
    tables = run_convergence(mode, out_dir=f"out/converge-{mode}", levels=levels)
    show(tables)


if __name__ == "__main__":
    main(*sys.argv[1:])
