"""``qfk`` command line.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver
non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

from . import pipeline
from .config import RunConfig
from .errors import ConfigError, ConvergenceError, DataError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_SOLVER = 0, 2, 3, 4

_FLAGS = {
    "--nu": ("nu", float),
    "--qubits": ("qubits", int),
    "--reps": ("reps", int),
    "--shots": ("shots", int),
    "--seed": ("seed", int),
    "--kernel": ("kernel", str),
    "--gamma": ("gamma", float),
    "--window": ("window", int),
    "--features": ("features", int),
    "--artifacts": ("artifacts_dir", str),
    "--train-csv": ("train_csv", str),
    "--test-csv": ("test_csv", str),
    "--engine": ("engine", str),
    "--jobs": ("n_jobs", int),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qfk", description="Quantum fidelity kernel one-class SVM anomaly detection")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in (
        ("preprocess", "smooth, encode, standardise, rank and select features"),
        ("kernel", "compute train and eval kernel matrices"),
        ("train", "fit the one-class SVM on the train kernel"),
        ("evaluate", "score the eval set and write the metrics report"),
        ("run", "preprocess, kernel, train and evaluate in one go"),
        ("synth", "write a synthetic labelled dataset"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="flat JSON config file")
        for flag, (_, typ) in _FLAGS.items():
            p.add_argument(flag, type=typ, default=None)
        if name in ("evaluate", "run"):
            p.add_argument("--heatmap", action="store_true", help="also write the eval kernel as heatmap.csv")
        if name == "synth":
            p.add_argument("--out", help="output CSV path")
    return parser


def _print_report(report) -> None:
    print(report.to_text())
    extra = report.extra
    print(f"mean decision value: normal {extra['mean_decision_normal']}, anomaly {extra['mean_decision_anomaly']}")
    k = extra["kernel"]
    if k.get("kernel") == "quantum":
        print(f"circuits: train {k['train_circuits']}, eval {k['eval_circuits']}; shots {k['shots_total']}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {key: getattr(args, flag[2:].replace("-", "_")) for flag, (key, _) in _FLAGS.items()}
    try:
        cfg = RunConfig.load(args.config, overrides)
        if args.command == "preprocess":
            print(json.dumps(pipeline.cmd_preprocess(cfg)))
        elif args.command == "kernel":
            print(json.dumps(pipeline.cmd_kernel(cfg)))
        elif args.command == "train":
            model = pipeline.cmd_train(cfg)
            print(f"trained: {len(model.support_indices)} support vectors, rho={model.rho:.6g}, "
                  f"iterations={model.iterations}")
        elif args.command == "evaluate":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                _print_report(pipeline.cmd_evaluate(cfg, args.heatmap))
        elif args.command == "run":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                _print_report(pipeline.run_all(cfg, args.heatmap))
        elif args.command == "synth":
            print(pipeline.cmd_synth(cfg, args.out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DataError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
