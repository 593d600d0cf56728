"""Fidelity kernels from a dense-angle-encoded, linearly entangled feature map.

``fidelity`` is the literal compute-uncompute estimate: prepare ``U(x)|0>``,
apply ``U(y)^dagger`` and read the all-zeros probability. Kernel assembly
defaults to the equivalent state-overlap route, which simulates each row's
feature state once and takes ``|<phi(y)|phi(x)>|^2`` for every pair; the
``engine="circuit"`` option runs one compute-uncompute circuit per pair
instead. Circuit/shot counters always report what the compute-uncompute
protocol would execute on hardware.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import qsim
from .errors import DataError
from .preprocess import FeatureMatrix
from .rng import check_seed, make_rng

RAW, EXP = "raw", "exp"
_TRAIN_TAG, _CROSS_TAG = 0, 1
_ANGLE_SLACK = 1e-12


@dataclass(frozen=True)
class FeatureMapSpec:
    n_qubits: int
    repetitions: int = 3
    features_per_qubit: int = 2
    entanglement: str = "linear"

    def __post_init__(self):
        qsim._check_n(self.n_qubits)
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.features_per_qubit != 2:
            raise ValueError("dense angle encoding packs exactly 2 features per qubit")
        if self.entanglement != "linear":
            raise ValueError("only linear nearest-neighbour entanglement is supported")

    @property
    def n_features(self) -> int:
        return self.features_per_qubit * self.n_qubits

    @property
    def gate_count(self) -> int:
        return self.repetitions * (3 * self.n_qubits + self.n_qubits - 1)

    def digest(self) -> str:
        doc = json.dumps(
            {
                "map": "ry-rz/cnot-chain/ry",
                "n_qubits": self.n_qubits,
                "repetitions": self.repetitions,
                "features_per_qubit": self.features_per_qubit,
                "entanglement": self.entanglement,
            },
            sort_keys=True,
        )
        return hashlib.sha256(doc.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Mode:
    """Exact probabilities (``shots is None``) or a seeded shot estimate."""

    shots: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be at least 1")
        check_seed(self.seed)

    @property
    def exact(self) -> bool:
        return self.shots is None

    @property
    def label(self) -> str:
        return "exact" if self.exact else f"shots:{self.shots}:{self.seed}"

    @classmethod
    def parse(cls, label: str) -> Mode:
        if label == "exact":
            return cls()
        parts = label.split(":")
        if len(parts) != 3 or parts[0] != "shots":
            raise DataError(f"bad mode label {label!r}")
        return cls(int(parts[1]), int(parts[2]))


EXACT = Mode()


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    values: np.ndarray
    stage: str = RAW
    mode: str = "exact"
    spec_hash: str = ""
    circuits: int = 0
    shots: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=float, ndmin=2)
        if values.ndim != 2:
            raise DataError("kernel values must be 2-D")
        if self.stage not in (RAW, EXP):
            raise DataError(f"unknown kernel stage {self.stage!r}")
        object.__setattr__(self, "values", values)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def header(self) -> str:
        return (
            f"qfk-kernel v1 rows={self.rows} cols={self.cols} stage={self.stage} "
            f"mode={self.mode} spec={self.spec_hash or '-'}"
        )


def _check_angles(x: np.ndarray, spec: FeatureMapSpec) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) != spec.n_features:
        raise DataError(f"feature vector has length {x.shape}, map expects {spec.n_features}")
    if not np.all(np.abs(x) <= np.pi + _ANGLE_SLACK):
        raise DataError("feature angles must lie in [-pi, pi]; scale them first")
    return x


def _layer_plan(spec: FeatureMapSpec):
    """Gate skeleton of U(x): (kind, qubits, feature index or None)."""
    n = spec.n_qubits
    layer = []
    for i in range(n):
        layer.append((qsim.RY, (i,), 2 * i))
        layer.append((qsim.RZ, (i,), 2 * i + 1))
    for i in range(n - 1):
        layer.append((qsim.CNOT, (i, i + 1), None))
    for i in range(n):
        layer.append((qsim.RY, (i,), 2 * i))
    return layer * spec.repetitions


def build_feature_map(x, spec: FeatureMapSpec) -> qsim.Circuit:
    """``repetitions`` layers of RY/RZ encoding, a CNOT chain, and a final RY."""
    x = _check_angles(x, spec)
    gates = [
        qsim.Gate(kind, qubits, 0.0 if f is None else float(x[f])) for kind, qubits, f in _layer_plan(spec)
    ]
    return qsim.Circuit(spec.n_qubits, gates)


def fidelity_circuit(x, y, spec: FeatureMapSpec) -> qsim.Circuit:
    return build_feature_map(x, spec).then(qsim.inverse(build_feature_map(y, spec)))


def fidelity(x, y, spec: FeatureMapSpec, mode: Mode = EXACT) -> float:
    state = qsim.run_circuit(qsim.zero_state(spec.n_qubits), fidelity_circuit(x, y, spec))
    if mode.exact:
        return qsim.prob_zero(state)
    return qsim.sample_zero_frequency(state, mode.shots, mode.seed)


def feature_states(X: FeatureMatrix | np.ndarray, spec: FeatureMapSpec) -> np.ndarray:
    """Feature states ``U(x)|0>`` for every row, shape ``(rows, 2**n_qubits)``."""
    data = X.data if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=float)
    if data.ndim != 2 or data.shape[1] != spec.n_features:
        raise DataError(f"matrix has {data.shape[-1]} columns, feature map expects {spec.n_features}")
    if not np.all(np.abs(data) <= np.pi + _ANGLE_SLACK):
        raise DataError("feature angles must lie in [-pi, pi]; scale them first")
    amps = qsim.zero_batch(spec.n_qubits, data.shape[0])
    for kind, qubits, f in _layer_plan(spec):
        if kind == qsim.CNOT:
            amps = qsim.cnot_batch(amps, spec.n_qubits, *qubits)
        else:
            amps = qsim.rotate_batch(amps, spec.n_qubits, kind, qubits[0], data[:, f])
    return amps


def _overlap_fidelities(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``out[i, j] = |<b_j|a_i>|^2``, clipped into [0, 1]."""
    return np.clip(np.abs(a @ b.conj().T) ** 2, 0.0, 1.0)


def _shot_estimate(p0: float, shots: int, seed: int, tag: int, i: int, j: int) -> float:
    u = make_rng(seed, tag, i, j).random(shots)
    return qsim.zero_count_from_uniforms(p0, u) / shots


def _chunks(n: int, n_jobs: int) -> list[range]:
    n_jobs = max(1, min(n_jobs, n))
    step = math.ceil(n / n_jobs)
    return [range(lo, min(n, lo + step)) for lo in range(0, n, step)]


def _run_rows(fn, n_rows: int, n_jobs: int) -> None:
    if n_jobs <= 1 or n_rows < 2:
        for i in range(n_rows):
            fn(i)
        return
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        list(pool.map(lambda rows: [fn(i) for i in rows], _chunks(n_rows, n_jobs)))


def _as_data(X, spec: FeatureMapSpec) -> np.ndarray:
    data = X.data if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=float)
    if data.ndim != 2 or data.shape[1] != spec.n_features:
        raise DataError(f"matrix has {data.shape[-1]} columns, feature map expects {spec.n_features}")
    return data


def train_kernel(
    X: FeatureMatrix | np.ndarray,
    spec: FeatureMapSpec,
    mode: Mode = EXACT,
    engine: str = "statevector",
    n_jobs: int = 1,
) -> KernelMatrix:
    """Self-kernel of the training rows, using ``k(x, y) = k(y, x)``.

    Only pairs ``i < j`` are evaluated (plus the diagonal in shot mode) and
    mirrored. In exact mode the diagonal is 1 by ``U^dagger U = I``.
    """
    data = _as_data(X, spec)
    m = data.shape[0]
    out = np.zeros((m, m))
    k = mode.shots or 0
    first = 0 if not mode.exact else 1  # offset of the first evaluated column from the diagonal

    if engine == "statevector":
        states = feature_states(data, spec)

        def fill(i):
            cols = np.arange(i + first, m)
            p = _overlap_fidelities(states[i : i + 1], states[cols])[0]
            if mode.exact:
                out[i, cols] = p
            else:
                out[i, cols] = [_shot_estimate(p[c], k, mode.seed, _TRAIN_TAG, i, int(j)) for c, j in enumerate(cols)]

    elif engine == "circuit":
        fill = _circuit_filler(data, data, spec, mode, out, _TRAIN_TAG, lambda i: range(i + first, m))
    else:
        raise ValueError(f"unknown engine {engine!r}")

    _run_rows(fill, m, n_jobs)
    upper = np.triu(out, 1)
    values = upper + upper.T
    values[np.diag_indices(m)] = 1.0 if mode.exact else np.diag(out)
    n_circ = m * (m - 1) // 2 + (0 if mode.exact else m)
    return KernelMatrix(values, RAW, mode.label, spec.digest(), n_circ, n_circ * k)


def cross_kernel(
    X_test: FeatureMatrix | np.ndarray,
    X_train: FeatureMatrix | np.ndarray,
    spec: FeatureMapSpec,
    mode: Mode = EXACT,
    engine: str = "statevector",
    n_jobs: int = 1,
) -> KernelMatrix:
    """``out[i, j] = fidelity(test_i, train_j)`` for every pair."""
    a, b = _as_data(X_test, spec), _as_data(X_train, spec)
    r, c = a.shape[0], b.shape[0]
    out = np.zeros((r, c))
    k = mode.shots or 0

    if engine == "statevector":
        sa, sb = feature_states(a, spec), feature_states(b, spec)
        if mode.exact:
            out[:] = _overlap_fidelities(sa, sb)
        else:

            def fill(i):
                p = _overlap_fidelities(sa[i : i + 1], sb)[0]
                out[i] = [_shot_estimate(p[j], k, mode.seed, _CROSS_TAG, i, j) for j in range(c)]

            _run_rows(fill, r, n_jobs)
    elif engine == "circuit":
        _run_rows(_circuit_filler(a, b, spec, mode, out, _CROSS_TAG, lambda i: range(c)), r, n_jobs)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return KernelMatrix(out, RAW, mode.label, spec.digest(), r * c, r * c * k)


def _circuit_filler(a, b, spec, mode, out, tag, columns):
    zero = qsim.zero_state(spec.n_qubits)

    def fill(i):
        for j in columns(i):
            state = qsim.run_circuit(zero, fidelity_circuit(a[i], b[j], spec))
            if mode.exact:
                out[i, j] = qsim.prob_zero(state)
            else:
                outcomes = qsim.sample_outcomes(state, mode.shots, make_rng(mode.seed, tag, i, j))
                out[i, j] = np.count_nonzero(outcomes == 0) / mode.shots

    return fill


def exponentiate(k: KernelMatrix) -> KernelMatrix:
    if k.stage != RAW:
        raise DataError("kernel is already exponentiated")
    return replace(k, values=np.exp(k.values), stage=EXP)


def save_kernel(k: KernelMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(k.header() + "\n")
        for row in k.values:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _parse_header(line: str) -> dict[str, str]:
    parts = line.split()
    if parts[:2] != ["qfk-kernel", "v1"]:
        raise DataError("not a qfk-kernel v1 file")
    fields = {}
    for p in parts[2:]:
        key, sep, value = p.partition("=")
        if not sep:
            raise DataError(f"bad header field {p!r}")
        fields[key] = value
    missing = {"rows", "cols", "stage", "mode", "spec"} - set(fields)
    if missing:
        raise DataError(f"kernel header lacks {sorted(missing)}")
    return fields


def load_kernel(path: str | Path) -> KernelMatrix:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DataError(f"{path}: empty kernel file")
    head = _parse_header(lines[0])
    try:
        rows, cols = int(head["rows"]), int(head["cols"])
    except ValueError as exc:
        raise DataError(f"{path}: corrupt header") from exc
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != rows:
        raise DataError(f"{path}: header says {rows} rows, file has {len(body)}")
    try:
        values = np.array([[float(v) for v in ln.split(",")] for ln in body], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: bad kernel entry") from exc
    if rows and values.shape != (rows, cols):
        raise DataError(f"{path}: header says {rows}x{cols}, data is {values.shape}")
    Mode.parse(head["mode"])
    return KernelMatrix(
        values.reshape(rows, cols), head["stage"], head["mode"], "" if head["spec"] == "-" else head["spec"]
    )
