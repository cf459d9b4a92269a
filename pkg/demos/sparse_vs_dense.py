"""Stream samples into the sparse online GP and compare it with a dense GP.

With room for every sample and a tiny novelty threshold the sparse model
reproduces the dense posterior; shrinking the capacity trades accuracy
for a bounded basis set.

    python3 demos/sparse_vs_dense.py
"""

import numpy as np

from infosampling import (
    HyperParams,
    SogpConfig,
    fit,
    predict,
    sogp_init,
    sogp_predict,
    sogp_process,
    synth_field,
)


def main():
    rng = np.random.default_rng(0)
    field = synth_field(0, 32, 32, bump_count=4, length_scale_range=(5, 9))
    cells = field.sampleable_cells()
    X = cells[rng.choice(len(cells), 60, replace=False)].astype(float)
    y = field.values[X[:, 0].astype(int), X[:, 1].astype(int)] + 0.05 * rng.normal(size=len(X))
    hp = HyperParams(-4.0, 1.0, (1.8, 1.8))
    grid = cells.astype(float)

    dense_mean, dense_cov = predict(fit(X, y, hp), grid)
    print(f"dense GP on {len(X)} samples")
    print("capacity  bv  rms(mean - dense)  rms(mean - truth)")
    truth = field.values[cells[:, 0], cells[:, 1]]
    for capacity in (60, 40, 20, 10):
        bv = sogp_init(SogpConfig(hp, capacity=capacity, novelty_threshold=1e-12))
        for x, v in zip(X, y):
            bv, _ = sogp_process(bv, (x, v))
        mean, _ = sogp_predict(bv, grid)
        gap = np.sqrt(np.mean((mean - dense_mean) ** 2))
        err = np.sqrt(np.mean((mean - truth) ** 2))
        print(f"{capacity:8d}  {bv.size:2d}  {gap:17.2e}  {err:17.4f}")


if __name__ == "__main__":
    main()
