"""Run a bundled sweep recipe from Python and pick out a few rows.

The same recipe runs from the shell with
``qranging advantage --recipe fig2a --out fig2a.csv``.
"""

from qranging.sweep import SweepConfig, load_recipe, render, run_sweep


def main():
    full = load_recipe("fig2a")
    # thin the mu axis to keep the demo quick
    cfg = SweepConfig(full.task, {"mu_B": full.axes["mu_B"], "mu": full.axes["mu"][::25]}, full.fixed)
    record = run_sweep(cfg, write=False)
    print(render(record))


if __name__ == "__main__":
    main()
