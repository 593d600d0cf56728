"""File-to-file pipeline stages behind the ``qfk`` subcommands.

Each stage reads its inputs from ``cfg.artifacts_dir`` and writes its outputs
there, so stages can be rerun independently. Everything except
``timings.json`` is a deterministic function of the configuration.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
import warnings
from pathlib import Path

import numpy as np

from . import fkernel as fk
from . import ingest, ocsvm
from .config import RunConfig
from .errors import ConfigError, DataError
from .metrics import MetricsReport, compute_metrics
from .preprocess import FeatureMatrix, PreprocessPipeline, fit_pipeline, smooth_dataset
from .rng import make_rng

PIPELINE_FILE = "pipeline.json"
TRAIN_MATRIX = "train_matrix.csv"
EVAL_MATRIX = "eval_matrix.csv"
EVAL_LABELS = "eval_labels.csv"
TRAIN_KERNEL = "kernel_train.qfk"
EVAL_KERNEL = "kernel_eval.qfk"
KERNEL_REPORT = "kernel_report.json"
MODEL_FILE = "model.json"
REPORT_FILE = "report.json"
HEATMAP_FILE = "heatmap.csv"
TIMINGS_FILE = "timings.json"

_TRAIN_SUBSAMPLE_STREAM = 10
_RANK_SUBSAMPLE_STREAM = 11


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path: Path) -> dict:
    if not path.is_file():
        raise DataError(f"missing artifact {path}; run the earlier stage first")
    return json.loads(path.read_text(encoding="utf-8"))


def _record_time(cfg: RunConfig, stage: str, seconds: float) -> None:
    path = cfg.artifacts / TIMINGS_FILE
    doc = json.loads(path.read_text()) if path.is_file() else {}
    doc[stage] = round(seconds, 3)
    _write_json(path, doc)


def _subsample(rows: np.ndarray, limit: int, seed: int, stream: int) -> np.ndarray:
    if len(rows) <= limit:
        return rows
    return np.sort(make_rng(seed, stream).permutation(rows)[:limit])


def _load(cfg: RunConfig, path: str) -> ingest.RawDataset:
    return ingest.load_csv(
        path,
        label_column=cfg.label_column,
        time_column=cfg.time_column,
        delimiter=cfg.delimiter,
        drop_columns=cfg.drop_columns,
    )


def prepare_regions(cfg: RunConfig) -> tuple[ingest.RawDataset, ingest.RawDataset]:
    """Smoothed training region and smoothed test region.

    With ``test_csv`` the two files are the regions; otherwise ``train_csv``
    is cut chronologically at ``train_fraction``. Each region is smoothed on
    its own so no window straddles the boundary.
    """
    if cfg.train_csv is None:
        raise ConfigError("train_csv is not set")
    if cfg.test_csv is not None:
        train, test = _load(cfg, cfg.train_csv), _load(cfg, cfg.test_csv)
        if train.feature_names != test.feature_names:
            raise DataError("train and test files have different feature columns")
    else:
        ds = _load(cfg, cfg.train_csv)
        boundary = math.floor(cfg.train_fraction * ds.n_rows)
        if boundary == 0 or boundary == ds.n_rows:
            raise DataError("train_fraction leaves one region empty")
        train, test = ds.take(np.arange(boundary)), ds.take(np.arange(boundary, ds.n_rows))
    return smooth_dataset(train, cfg.window), smooth_dataset(test, cfg.window)


def cmd_preprocess(cfg: RunConfig) -> dict:
    t0 = time.perf_counter()
    train, test = prepare_regions(cfg)
    train_rows = np.arange(train.n_rows)
    if cfg.train_normal_only:
        if train.labels is None:
            raise DataError("train_normal_only needs labels in the training data")
        train_rows = train_rows[train.labels == 0]
    train_rows = _subsample(train_rows, cfg.train_rows, cfg.seed, _TRAIN_SUBSAMPLE_STREAM)
    if len(train_rows) == 0:
        raise DataError("no training rows left after filtering")

    eval_rows, rest = ingest.sample_eval(test, cfg.eval_normal, cfg.eval_anomaly, cfg.seed)
    if len(eval_rows) == 0:
        raise DataError("evaluation set is empty")
    rank_rows = _subsample(rest, cfg.rank_max_rows, cfg.seed, _RANK_SUBSAMPLE_STREAM)
    rank = test.take(rank_rows)
    if rank.labels is None or len(np.unique(rank.labels)) < 2:
        raise DataError("the ranking slice (test rows outside the eval set) needs both classes")

    n_cols = len(train.feature_names)
    if not 1 <= cfg.features <= n_cols:
        raise ConfigError(f"features={cfg.features} but the data has {n_cols} columns")
    pipe = fit_pipeline(train.take(train_rows), rank, cfg.features, cfg.window, cfg.tree_depth)
    pipe.extra = {"train_rows": len(train_rows), "rank_rows": len(rank_rows), "rank_anomalies": int(rank.labels.sum())}
    x_train = pipe.transform_smoothed(train.take(train_rows))
    eval_ds = ingest.take_blocks(test, eval_rows)
    x_eval = pipe.transform_smoothed(eval_ds)

    out = cfg.artifacts
    out.mkdir(parents=True, exist_ok=True)
    pipe.save(out / PIPELINE_FILE)
    x_train.save_csv(out / TRAIN_MATRIX)
    x_eval.save_csv(out / EVAL_MATRIX)
    (out / EVAL_LABELS).write_text(cfg.label_column + "\n" + "".join(f"{int(v)}\n" for v in eval_ds.labels))
    _record_time(cfg, "preprocess", time.perf_counter() - t0)
    return {"train": x_train.rows, "eval": x_eval.rows, "features": pipe.selected}


def _read_labels(path: Path) -> np.ndarray:
    if not path.is_file():
        raise DataError(f"missing artifact {path}; run preprocess first")
    lines = path.read_text().split()
    try:
        return np.array([int(v) for v in lines[1:]], dtype=np.int8)
    except ValueError as exc:
        raise DataError(f"{path}: bad label") from exc


def cmd_kernel(cfg: RunConfig) -> dict:
    t0 = time.perf_counter()
    out = cfg.artifacts
    x_train = FeatureMatrix.load_csv(out / TRAIN_MATRIX)
    x_eval = FeatureMatrix.load_csv(out / EVAL_MATRIX)
    if x_train.cols != cfg.features:
        raise ConfigError(f"matrices have {x_train.cols} features, config says {cfg.features}")
    if cfg.kernel == "quantum":
        spec = fk.FeatureMapSpec(cfg.qubits, cfg.reps)
        mode = fk.Mode(cfg.shots or None, cfg.seed)
        k_train = fk.train_kernel(x_train, spec, mode, cfg.engine, cfg.n_jobs)
        k_eval = fk.cross_kernel(x_eval, x_train, spec, mode, cfg.engine, cfg.n_jobs)
        report = {
            "kernel": "quantum",
            "spec": spec.digest(),
            "mode": mode.label,
            "qubits": cfg.qubits,
            "reps": cfg.reps,
            "gates_per_feature_map": spec.gate_count,
            "train_circuits": k_train.circuits,
            "eval_circuits": k_eval.circuits,
            "shots_total": k_train.shots + k_eval.shots,
        }
        k_train, k_eval = fk.exponentiate(k_train), fk.exponentiate(k_eval)
    else:
        gamma = cfg.rbf_gamma
        k_train = ocsvm.rbf_kernel(x_train, x_train, gamma)
        k_eval = ocsvm.rbf_kernel(x_eval, x_train, gamma)
        report = {"kernel": "rbf", "spec": k_train.spec_hash, "gamma": gamma}
    fk.save_kernel(k_train, out / TRAIN_KERNEL)
    fk.save_kernel(k_eval, out / EVAL_KERNEL)
    _write_json(out / KERNEL_REPORT, report)
    _record_time(cfg, "kernel", time.perf_counter() - t0)
    return report


def cmd_train(cfg: RunConfig) -> ocsvm.OcsvmModel:
    t0 = time.perf_counter()
    k_train = fk.load_kernel(cfg.artifacts / TRAIN_KERNEL)
    model = ocsvm.train_ocsvm(k_train, cfg.nu)
    model.save(cfg.artifacts / MODEL_FILE)
    _record_time(cfg, "train", time.perf_counter() - t0)
    return model


def cmd_evaluate(cfg: RunConfig, heatmap: bool = False) -> MetricsReport:
    t0 = time.perf_counter()
    out = cfg.artifacts
    model = ocsvm.OcsvmModel.load(out / MODEL_FILE)
    k_eval = fk.load_kernel(out / EVAL_KERNEL)
    labels = _read_labels(out / EVAL_LABELS)
    if len(labels) != k_eval.rows:
        raise DataError(f"{len(labels)} eval labels for {k_eval.rows} kernel rows")
    scores = ocsvm.decision_values(model, k_eval)
    report = compute_metrics(labels, (scores < 0).astype(np.int8))
    kernel_report = _read_json(out / KERNEL_REPORT)
    report.extra = {
        "kernel": kernel_report,
        "nu": model.nu,
        "support_vectors": int(len(model.support_indices)),
        "solver_iterations": model.iterations,
        "mean_decision_normal": float(scores[labels == 0].mean()) if np.any(labels == 0) else None,
        "mean_decision_anomaly": float(scores[labels == 1].mean()) if np.any(labels == 1) else None,
    }
    _write_json(out / REPORT_FILE, report.to_json())
    if heatmap:
        raw = np.log(k_eval.values) if kernel_report["kernel"] == "quantum" else k_eval.values
        with open(out / HEATMAP_FILE, "w", encoding="utf-8") as fh:
            fh.write("label," + ",".join(f"train{j}" for j in range(k_eval.cols)) + "\n")
            for lab, row in zip(labels, raw):
                fh.write(f"{int(lab)}," + ",".join(f"{v:.6g}" for v in row) + "\n")
    _record_time(cfg, "evaluate", time.perf_counter() - t0)
    return report


def cmd_synth(cfg: RunConfig, out_path: str | None = None) -> Path:
    ds = ingest.generate_synthetic(cfg.synth_normal, cfg.synth_anomaly, cfg.synth_features, cfg.synth_shift, cfg.seed)
    path = Path(out_path or cfg.train_csv or cfg.artifacts / "synthetic.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    ingest.write_csv(ds, path, label_column=cfg.label_column, time_column=cfg.time_column)
    return path


def run_all(cfg: RunConfig, heatmap: bool = False) -> MetricsReport:
    cmd_preprocess(cfg)
    cmd_kernel(cfg)
    cmd_train(cfg)
    return cmd_evaluate(cfg, heatmap)


def compare_kernels(cfg: RunConfig, feature_counts=(8, 16, 24), kernels=("quantum", "rbf")) -> list[dict]:
    """Run the full pipeline for every (kernel, feature count) pair.

    Each run gets its own subdirectory of ``cfg.artifacts_dir``; the quantum
    kernel uses ``features / 2`` qubits. Returns one summary row per run.
    """
    rows = []
    for k in feature_counts:
        for kernel in kernels:
            if kernel == "quantum" and k % 2:
                raise ConfigError(f"quantum kernel needs an even feature count, got {k}")
            run = dataclasses.replace(
                cfg,
                kernel=kernel,
                features=k,
                qubits=k // 2 if kernel == "quantum" else cfg.qubits,
                artifacts_dir=str(cfg.artifacts / f"{kernel}_{k}"),
            ).validate()
            t0 = time.perf_counter()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                report = run_all(run)
            rows.append(
                {
                    "kernel": kernel,
                    "features": k,
                    "qubits": run.qubits if kernel == "quantum" else None,
                    "accuracy": report.accuracy,
                    "precision": report.weighted["precision"],
                    "recall": report.weighted["recall"],
                    "f1": report.weighted["f1"],
                    "macro_f1": report.macro["f1"],
                    "anomaly_f1": report.f1,
                    "seconds": round(time.perf_counter() - t0, 1),
                }
            )
    return rows


def format_table(rows: list[dict]) -> str:
    lines = [f"{'kernel':8s} {'features':>8s} {'acc':>6s} {'prec':>6s} {'recall':>6s} {'f1':>6s} {'macroF1':>8s} {'sec':>7s}"]
    for r in rows:
        lines.append(
            f"{r['kernel']:8s} {r['features']:8d} {r['accuracy']:6.3f} {r['precision']:6.3f} "
            f"{r['recall']:6.3f} {r['f1']:6.3f} {r['macro_f1']:8.3f} {r['seconds']:7.1f}"
        )
    return "\n".join(lines)
