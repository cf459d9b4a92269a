"""Informative, random and lawnmower sampling on the same synthetic field.

Runs one mission per strategy and prints the relative MSE curve
(MSE divided by the field variance) at a few checkpoints, plus the
first step at which each strategy gets below 10% of the variance.

    python3 demos/compare_strategies.py [seed]
"""

import sys

import numpy as np

from infosampling import MissionConfig, run_mission, synth_field
from infosampling.experiment import steps_to_threshold


def main(seed=0):
    field = synth_field(seed, 48, 48, bump_count=6, amplitude_range=(-3, 3), length_scale_range=(5, 12))
    noise = 0.01 * field.value_range()
    shown = [0, 100, 200, 300, 400, 500, 600]
    print(f"seed {seed}: 48x48 field, budget 600, noise sd {noise:.3f}")
    print("strategy     " + "".join(f"{s:>7d}" for s in shown) + "   steps to 10%")
    for strategy in ("informative", "random", "lawnmower"):
        cfg = MissionConfig(strategy=strategy, budget=600, noise_sd=noise, seed=seed)
        trace = run_mission(cfg, field)
        steps, mse, _ = trace.metric_arrays()
        rel = mse / field.variance()
        row = "".join(f"{rel[np.searchsorted(steps, s)]:7.3f}" for s in shown)
        hit = steps_to_threshold(steps, rel, 0.1)
        print(f"{strategy:12s} {row}   {hit:g}  ({len(trace.reestimations)} re-estimations)")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
