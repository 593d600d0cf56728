"""Quantum fidelity kernel vs RBF baseline at several feature counts.

With --train-csv/--test-csv (e.g. HAI ``train1.csv.gz`` and ``test1.csv.gz``)
the real files are used; otherwise a synthetic trace is generated first.

    python3 scripts/compare_kernels.py --features 8 16 24
    python3 scripts/compare_kernels.py --train-csv train1.csv.gz --test-csv test1.csv.gz --delimiter ';'
"""

import argparse
import json
from pathlib import Path

from qfk import pipeline
from qfk.config import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--train-csv")
    ap.add_argument("--test-csv")
    ap.add_argument("--delimiter", default=",")
    ap.add_argument("--drop", nargs="*", default=["attack_P1", "attack_P2", "attack_P3"])
    ap.add_argument("--features", nargs="+", type=int, default=[8, 16, 24])
    ap.add_argument("--eval-normal", type=int, default=1000)
    ap.add_argument("--eval-anomaly", type=int, default=500)
    ap.add_argument("--train-rows", type=int, default=1000)
    ap.add_argument("--nu", type=float, default=0.04)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="runs/compare")
    args = ap.parse_args()

    out = Path(args.out)
    cfg = RunConfig(
        train_csv=args.train_csv,
        test_csv=args.test_csv,
        artifacts_dir=str(out),
        delimiter=args.delimiter,
        drop_columns=args.drop,
        train_rows=args.train_rows,
        eval_normal=args.eval_normal,
        eval_anomaly=args.eval_anomaly,
        nu=args.nu,
        seed=args.seed,
        n_jobs=args.jobs,
        synth_features=max(args.features),
    )
    if cfg.train_csv is None:
        cfg.train_csv = str(out / "synthetic.csv")
        # The synthetic trace is smaller than HAI; keep the eval draw inside it.
        cfg.eval_normal, cfg.eval_anomaly = min(cfg.eval_normal, 200), min(cfg.eval_anomaly, 100)
        pipeline.cmd_synth(cfg)
        print(f"synthetic data written to {cfg.train_csv}")
    rows = pipeline.compare_kernels(cfg, tuple(args.features))
    print(pipeline.format_table(rows))
    (out / "comparison.json").write_text(json.dumps(rows, indent=1) + "\n")


if __name__ == "__main__":
    main()
