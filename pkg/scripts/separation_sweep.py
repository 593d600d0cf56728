"""Seed sweep of the synthetic separation check, SMO vs a reference solver.

For each seed: generate the synthetic trace, run the quantum pipeline, then
re-solve the same training kernel with the projected-gradient reference from
``tests/oracles.py`` and score both models on the same eval kernel. This is
how the floors in ``tests/test_acceptance.py`` were set.

    python3 scripts/separation_sweep.py --seeds 0 1 2 3 4
"""

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from oracles import reference_ocsvm_dual  # noqa: E402

from qfk import fkernel as fk  # noqa: E402
from qfk import ocsvm, pipeline  # noqa: E402
from qfk.config import RunConfig  # noqa: E402
from qfk.metrics import compute_metrics  # noqa: E402


def reference_scores(K, K_eval, nu, iters):
    a = reference_ocsvm_dual(K, nu, iters)
    bound = 1.0 / (nu * len(a))
    g = K @ a
    free = (a > 1e-9) & (a < bound - 1e-9)
    rho = np.median(g[free]) if free.any() else g[a > 1e-9].mean()
    return a, K_eval @ a - rho


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", nargs="+", type=int, default=[0, 1, 2, 3, 4])
    ap.add_argument("--iters", type=int, default=3000)
    ap.add_argument("--out", default="runs/sweep")
    args = ap.parse_args()
    warnings.simplefilter("ignore", RuntimeWarning)

    print(f"{'seed':>4s} {'smo F1':>7s} {'ref F1':>7s} {'rel obj gap':>11s} {'mean d normal':>13s} {'mean d anomaly':>14s}")
    for seed in args.seeds:
        root = Path(args.out) / str(seed)
        cfg = RunConfig(
            train_csv=str(root / "synthetic.csv"),
            artifacts_dir=str(root / "art"),
            eval_normal=200,
            eval_anomaly=100,
            seed=seed,
        ).validate()
        pipeline.cmd_synth(cfg)
        report = pipeline.run_all(cfg)
        K = fk.load_kernel(cfg.artifacts / pipeline.TRAIN_KERNEL).values
        K_eval = fk.load_kernel(cfg.artifacts / pipeline.EVAL_KERNEL).values
        labels = pipeline._read_labels(cfg.artifacts / pipeline.EVAL_LABELS)
        model = ocsvm.OcsvmModel.load(cfg.artifacts / pipeline.MODEL_FILE)
        a, d = reference_scores(K, K_eval, cfg.nu, args.iters)
        ref = compute_metrics(labels, (d < 0).astype(int))
        ours, theirs = ocsvm.dual_objective(K, model.alpha), ocsvm.dual_objective(K, a)
        print(
            f"{seed:4d} {report.macro['f1']:7.4f} {ref.macro['f1']:7.4f} {abs(ours - theirs) / theirs:11.2e} "
            f"{report.extra['mean_decision_normal']:13.5f} {report.extra['mean_decision_anomaly']:14.5f}"
        )


if __name__ == "__main__":
    main()
