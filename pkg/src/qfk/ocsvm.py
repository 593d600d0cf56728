"""nu-one-class SVM on precomputed kernels, plus the RBF baseline kernel.

The dual problem is

    minimise    0.5 * alpha^T K alpha
    subject to  0 <= alpha_i <= 1 / (nu * n),   sum(alpha) = 1

solved by pairwise (SMO) updates on the maximal-violating pair. The decision
function is ``f(x) = sum_i alpha_i k(x_i, x) - rho``, with values inside the
solver's final KKT gap snapped to 0; a row is anomalous iff ``f(x) < 0``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError, ConvergenceError, DataError
from .fkernel import EXP, KernelMatrix
from .preprocess import FeatureMatrix

DEFAULT_NU = 0.04
TOL = 1e-6
MAX_ITER = 10**6
ALPHA_EPS = 1e-12
_TAU = 1e-12
_MARGIN_FLOOR = 1e-12


@dataclass(eq=False)
class OcsvmModel:
    alpha: np.ndarray
    rho: float
    nu: float
    n_train: int
    kernel_meta: dict = field(default_factory=dict)
    iterations: int = 0
    residual: float = 0.0

    @property
    def support_indices(self) -> np.ndarray:
        return np.nonzero(self.alpha > ALPHA_EPS)[0]

    @property
    def margin(self) -> float:
        """Decision values this close to 0 are treated as on the boundary.

        Free support vectors agree on ``rho`` only up to the final KKT gap.
        """
        return max(self.residual, _MARGIN_FLOOR)

    @property
    def bound(self) -> float:
        return 1.0 / (self.nu * self.n_train)

    def to_json(self) -> dict:
        return {
            "nu": self.nu,
            "rho": self.rho,
            "alpha": self.alpha.tolist(),
            "support_indices": self.support_indices.tolist(),
            "n_train": self.n_train,
            "kernel_meta": self.kernel_meta,
            "iterations": self.iterations,
            "residual": self.residual,
        }

    @classmethod
    def from_json(cls, doc: dict) -> OcsvmModel:
        try:
            model = cls(
                alpha=np.asarray(doc["alpha"], dtype=float),
                rho=float(doc["rho"]),
                nu=float(doc["nu"]),
                n_train=int(doc["n_train"]),
                kernel_meta=dict(doc.get("kernel_meta", {})),
                iterations=int(doc.get("iterations", 0)),
                residual=float(doc.get("residual", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed model document: {exc}") from exc
        if len(model.alpha) != model.n_train:
            raise DataError("alpha length differs from n_train")
        if "support_indices" in doc and list(doc["support_indices"]) != model.support_indices.tolist():
            raise DataError("support_indices inconsistent with alpha")
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> OcsvmModel:
        path = Path(path)
        if not path.is_file():
            raise DataError(f"no such file: {path}")
        return cls.from_json(json.loads(path.read_text(encoding="utf-8")))


@dataclass(frozen=True)
class Prediction:
    decision_value: float
    label: str

    @property
    def is_anomaly(self) -> bool:
        return self.label == "anomaly"


def _kernel_values(K) -> tuple[np.ndarray, dict]:
    if isinstance(K, KernelMatrix):
        return K.values, {"stage": K.stage, "mode": K.mode, "spec": K.spec_hash}
    return np.asarray(K, dtype=float), {}


def dual_objective(K: np.ndarray, alpha: np.ndarray) -> float:
    return 0.5 * float(alpha @ K @ alpha)


def train_ocsvm(
    K,
    nu: float = DEFAULT_NU,
    tol: float = TOL,
    max_iter: int = MAX_ITER,
    trace: list | None = None,
) -> OcsvmModel:
    """Fit the dual by SMO.

    Each step picks ``i`` minimising the gradient among coefficients below
    the box bound and ``j`` maximising it among positive coefficients (first
    index on ties), then moves mass from ``j`` to ``i`` by the exact line
    minimiser, clipped to the box. Converges when the gap ``G_j - G_i`` drops
    below ``tol``. ``rho`` is the median gradient over strictly interior
    coefficients, or the mean over all support vectors when none is interior.
    If ``trace`` is a list, the dual objective after every step is appended.
    """
    Kv, meta = _kernel_values(K)
    if Kv.ndim != 2 or Kv.shape[0] != Kv.shape[1]:
        raise DataError(f"training kernel must be square, got {Kv.shape}")
    if np.max(np.abs(Kv - Kv.T), initial=0.0) > 1e-9:
        raise DataError("training kernel is not symmetric")
    if not (isinstance(nu, (int, float)) and 0.0 < nu <= 1.0):
        raise ConfigError(f"nu must lie in (0, 1], got {nu}")
    n = Kv.shape[0]
    if n < 1:
        raise DataError("empty training kernel")
    C = 1.0 / (nu * n)

    alpha = np.zeros(n)
    n_full = min(n, math.floor(nu * n))
    alpha[:n_full] = C
    if n_full < n:
        alpha[n_full] = 1.0 - n_full * C
    grad = Kv @ alpha
    diag = np.diag(Kv).copy()

    it, gap = 0, math.inf
    while True:
        up = alpha < C
        low = alpha > 0.0
        i = int(np.argmin(np.where(up, grad, np.inf)))
        j = int(np.argmax(np.where(low, grad, -np.inf)))
        gap = float(grad[j] - grad[i]) if up.any() and low.any() else 0.0
        if gap < tol:
            break
        if it >= max_iter:
            raise ConvergenceError("one-class SVM dual did not converge", gap, it)
        curv = diag[i] + diag[j] - 2.0 * Kv[i, j]
        step = gap / (curv if curv > 0 else _TAU)
        room_i, room_j = C - alpha[i], alpha[j]
        step = min(step, room_i, room_j)
        alpha[i] += step
        alpha[j] -= step
        if step == room_i:
            alpha[i] = C
        if step == room_j:
            alpha[j] = 0.0
        grad += step * (Kv[:, i] - Kv[:, j])
        it += 1
        if trace is not None:
            trace.append(0.5 * float(alpha @ grad))

    sv = alpha > ALPHA_EPS
    free = sv & (alpha < C - ALPHA_EPS)
    rho = float(np.median(grad[free])) if free.any() else float(np.mean(grad[sv]))
    return OcsvmModel(alpha, rho, float(nu), n, meta, it, max(gap, 0.0))


def decision_values(model: OcsvmModel, K_cross) -> np.ndarray:
    Kv, meta = _kernel_values(K_cross)
    if Kv.ndim != 2 or Kv.shape[1] != model.n_train:
        raise DataError(f"cross kernel has {Kv.shape[-1]} columns, model was trained on {model.n_train}")
    stage = model.kernel_meta.get("stage")
    if meta and stage and meta["stage"] != stage:
        raise DataError(f"cross kernel stage {meta['stage']!r} differs from training stage {stage!r}")
    spec = model.kernel_meta.get("spec")
    if meta and spec and meta["spec"] and meta["spec"] != spec:
        raise DataError("cross kernel was built with a different kernel spec than the model")
    sv = model.support_indices
    d = Kv[:, sv] @ model.alpha[sv] - model.rho
    d[np.abs(d) <= model.margin] = 0.0
    return d


def predict_labels(model: OcsvmModel, K_cross) -> np.ndarray:
    """1 for anomaly, 0 for normal; a zero decision value counts as normal."""
    return (decision_values(model, K_cross) < 0).astype(np.int8)


def predict(model: OcsvmModel, K_cross) -> list[Prediction]:
    return [Prediction(float(v), "anomaly" if v < 0 else "normal") for v in decision_values(model, K_cross)]


def rbf_kernel(X: FeatureMatrix | np.ndarray, Y: FeatureMatrix | np.ndarray, gamma: float) -> KernelMatrix:
    """``exp(-gamma * ||x - y||^2)``; already on the exponentiated stage."""
    if not gamma > 0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    a = X.data if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=float)
    b = Y.data if isinstance(Y, FeatureMatrix) else np.asarray(Y, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise DataError(f"feature counts differ: {a.shape} vs {b.shape}")
    values = np.exp(-gamma * cdist(a, b, "sqeuclidean"))
    tag = hashlib.sha256(json.dumps({"kernel": "rbf", "gamma": float(gamma)}).encode()).hexdigest()[:16]
    return KernelMatrix(values, EXP, "exact", tag)
