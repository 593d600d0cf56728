"""Preprocessing chain: smoothing, categorical encoding, standardisation,
Gini-tree feature ranking, top-k selection and angle scaling."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError
from .ingest import CATEGORICAL, NUMERIC, Column, RawDataset

DEFAULT_WINDOW = 60
DEFAULT_TREE_DEPTH = 8
MIN_IMPURITY_DECREASE = 1e-12


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    data: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        data = np.array(self.data, dtype=float, ndmin=2)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if data.ndim != 2:
            raise DataError("feature matrix must be 2-D")
        if data.shape[1] != len(self.feature_names):
            raise DataError(f"{data.shape[1]} columns but {len(self.feature_names)} names")
        if not np.all(np.isfinite(data)):
            raise DataError("feature matrix has non-finite entries")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_dataset(cls, ds: RawDataset) -> FeatureMatrix:
        return cls(ds.numeric_matrix(), ds.feature_names)

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(self.feature_names) + "\n")
            for row in self.data:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def load_csv(cls, path: str | Path) -> FeatureMatrix:
        path = Path(path)
        if not path.is_file():
            raise DataError(f"no such file: {path}")
        lines = path.read_text(encoding="utf-8").splitlines()
        if not lines:
            raise DataError(f"{path}: empty matrix file")
        names = lines[0].split(",")
        try:
            data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:] if ln], dtype=float)
        except ValueError as exc:
            raise DataError(f"{path}: bad matrix entry") from exc
        return cls(data.reshape(-1, len(names)), names)


# --- smoothing -------------------------------------------------------------


def moving_average(xs, w: int = DEFAULT_WINDOW) -> np.ndarray:
    """Trailing mean over ``w`` samples; the first ``w - 1`` outputs average
    whatever history exists, so the output is as long as the input."""
    xs = np.asarray(xs, dtype=float)
    if w < 1:
        raise ValueError("window length must be at least 1")
    if xs.ndim != 1 or len(xs) == 0:
        raise ValueError("moving_average needs a nonempty 1-D series")
    n = len(xs)
    out = np.empty(n)
    head = min(w - 1, n)
    if head:
        out[:head] = np.cumsum(xs[:head]) / np.arange(1, head + 1)
    if n >= w:
        out[w - 1 :] = sliding_window_view(xs, w).sum(axis=1) / w
    return out


def smooth_dataset(ds: RawDataset, w: int = DEFAULT_WINDOW) -> RawDataset:
    values = {
        c.name: moving_average(ds.values[c.name], w) if c.kind == NUMERIC else ds.values[c.name]
        for c in ds.columns
    }
    return ds.with_values(values)


# --- categorical encoding --------------------------------------------------


def fit_category_tables(ds: RawDataset) -> dict[str, dict[str, float]]:
    """Relative frequency of every category, per categorical column."""
    tables = {}
    for c in ds.columns:
        if c.kind != CATEGORICAL:
            continue
        cats, counts = np.unique(ds.values[c.name].astype(str), return_counts=True)
        tables[c.name] = {str(k): int(v) / ds.n_rows for k, v in zip(cats, counts)}
    return tables


def encode_categoricals(ds: RawDataset, tables: dict[str, dict[str, float]] | None = None) -> RawDataset:
    """Replace categorical cells by their category's relative frequency.

    ``tables`` defaults to frequencies fitted on ``ds`` itself; categories
    absent from a supplied table encode as 0.
    """
    if tables is None:
        tables = fit_category_tables(ds)
    values, columns = {}, []
    for c in ds.columns:
        v = ds.values[c.name]
        if c.kind == CATEGORICAL:
            if c.name not in tables:
                raise DataError(f"no category table for column {c.name!r}")
            table = tables[c.name]
            v = np.array([table.get(str(cell), 0.0) for cell in v], dtype=float)
        values[c.name] = v
        columns.append(Column(c.name, NUMERIC))
    return ds.with_values(values, columns)


# --- standardisation -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScalerParams:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        if mu.shape != sigma.shape or mu.ndim != 1:
            raise DataError("mu and sigma must be 1-D and equally long")
        if not np.all(np.isfinite(sigma)) or np.any(sigma < 0):
            raise DataError("sigma entries must be finite and nonnegative")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)


def fit_scaler(m: FeatureMatrix) -> ScalerParams:
    if m.rows < 1:
        raise DataError("cannot fit a scaler on zero rows")
    mu = m.data.mean(axis=0)
    sigma = np.sqrt(((m.data - mu) ** 2).mean(axis=0))
    # A constant column's float mean can miss its value by an ulp; pin it.
    flat = m.data.min(axis=0) == m.data.max(axis=0)
    mu[flat] = m.data[0, flat]
    sigma[flat] = 0.0
    return ScalerParams(mu, sigma)


def apply_scaler(m: FeatureMatrix, p: ScalerParams) -> FeatureMatrix:
    if m.cols != len(p.mu):
        raise DataError(f"scaler fitted on {len(p.mu)} columns, matrix has {m.cols}")
    divisor = np.where(p.sigma == 0, 1.0, p.sigma)
    return FeatureMatrix((m.data - p.mu) / divisor, m.feature_names)


# --- Gini decision tree ----------------------------------------------------


@dataclass
class TreeNode:
    n_samples: int
    counts: tuple[int, int]
    impurity: float
    depth: int
    feature: int = -1
    threshold: float = math.nan
    decrease: float = 0.0
    left: int = -1
    right: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class GiniTree:
    """Binary CART tree; ``nodes[0]`` is the root, children referenced by index.

    A sample goes left when ``x[feature] <= threshold``.
    """

    nodes: list[TreeNode]
    n_features: int
    max_depth: int

    @property
    def n_samples(self) -> int:
        return self.nodes[0].n_samples

    @property
    def depth(self) -> int:
        return max(n.depth for n in self.nodes if n.is_leaf)

    def leaves(self) -> list[TreeNode]:
        return [n for n in self.nodes if n.is_leaf]

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.empty(len(X), dtype=np.int8)
        for r, x in enumerate(X):
            node = self.nodes[0]
            while not node.is_leaf:
                node = self.nodes[node.left if x[node.feature] <= node.threshold else node.right]
            out[r] = int(node.counts[1] > node.counts[0])
        return out


def gini(counts) -> float:
    n = sum(counts)
    if n == 0:
        return 0.0
    return 1.0 - sum((c / n) ** 2 for c in counts)


def _best_split(X: np.ndarray, y: np.ndarray, parent_impurity: float):
    n = len(y)
    best = (-math.inf, -1, math.nan)
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs, ys = X[order, f], y[order]
        cut = np.nonzero(xs[:-1] < xs[1:])[0]
        if len(cut) == 0:
            continue
        n_left = cut + 1.0
        ones_left = np.cumsum(ys)[cut]
        n_right = n - n_left
        ones_right = ys.sum() - ones_left
        p_l, p_r = ones_left / n_left, ones_right / n_right
        g_left = 1.0 - p_l**2 - (1.0 - p_l) ** 2
        g_right = 1.0 - p_r**2 - (1.0 - p_r) ** 2
        decrease = parent_impurity - (n_left / n) * g_left - (n_right / n) * g_right
        k = int(np.argmax(decrease))
        if decrease[k] > best[0]:
            best = (float(decrease[k]), f, 0.5 * (xs[cut[k]] + xs[cut[k] + 1]))
    return best


def fit_gini_tree(m: FeatureMatrix | np.ndarray, labels, max_depth: int = DEFAULT_TREE_DEPTH) -> GiniTree:
    """Greedy CART on Gini impurity.

    Candidate thresholds are midpoints between consecutive distinct values.
    Among equally good splits the lowest feature index wins, then the lowest
    threshold. Growth stops at ``max_depth``, on pure nodes, or when the best
    decrease falls below 1e-12.
    """
    X = m.data if isinstance(m, FeatureMatrix) else np.asarray(m, dtype=float)
    y = np.asarray(labels).astype(np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise DataError("labels must match the matrix row count")
    if max_depth < 1:
        raise ValueError("max_depth must be positive")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("labels must be 0 or 1")
    if len(np.unique(y)) < 2:
        raise DataError("Gini ranking needs both classes present")

    nodes: list[TreeNode] = []

    def grow(rows: np.ndarray, depth: int) -> int:
        ones = int(y[rows].sum())
        counts = (len(rows) - ones, ones)
        node = TreeNode(len(rows), counts, gini(counts), depth)
        idx = len(nodes)
        nodes.append(node)
        if depth >= max_depth or 0 in counts:
            return idx
        decrease, f, thr = _best_split(X[rows], y[rows], node.impurity)
        if f < 0 or decrease < MIN_IMPURITY_DECREASE:
            return idx
        node.feature, node.threshold, node.decrease = f, float(thr), decrease
        go_left = X[rows, f] <= thr
        node.left = grow(rows[go_left], depth + 1)
        node.right = grow(rows[~go_left], depth + 1)
        return idx

    grow(np.arange(len(y)), 0)
    return GiniTree(nodes, X.shape[1], max_depth)


@dataclass(frozen=True, eq=False)
class FeatureRanking:
    order: np.ndarray
    importance: np.ndarray

    def __post_init__(self):
        order = np.asarray(self.order, dtype=np.intp)
        imp = np.asarray(self.importance, dtype=float)
        if sorted(order.tolist()) != list(range(len(imp))):
            raise DataError("order must be a permutation of the feature indices")
        if np.any(imp < 0) or abs(imp.sum() - 1.0) > 1e-9:
            raise DataError("importance must be nonnegative and sum to 1")
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "importance", imp)


def rank_features(t: GiniTree) -> FeatureRanking:
    """Mean-decrease-in-impurity importance, normalised to sum to one."""
    if not t.nodes:
        raise DataError("empty tree")
    imp = np.zeros(t.n_features)
    total = t.n_samples
    for node in t.nodes:
        if not node.is_leaf:
            imp[node.feature] += node.n_samples / total * node.decrease
    s = imp.sum()
    if s <= 0:
        imp = np.full(t.n_features, 1.0 / t.n_features)
    else:
        imp = imp / s
    # Stable sort on -importance keeps ascending index order among ties.
    order = np.argsort(-imp, kind="stable")
    return FeatureRanking(order, imp)


def select_features(m: FeatureMatrix, r: FeatureRanking, k: int) -> FeatureMatrix:
    if len(r.order) != m.cols:
        raise DataError(f"ranking covers {len(r.order)} features, matrix has {m.cols}")
    if not 1 <= k <= m.cols:
        raise DataError(f"k={k} outside 1..{m.cols}")
    keep = r.order[:k]
    return FeatureMatrix(m.data[:, keep], [m.feature_names[i] for i in keep])


# --- angle scaling ---------------------------------------------------------


def fit_angle_bounds(m: FeatureMatrix) -> np.ndarray:
    """Per-feature ``(min, max)`` as a ``(cols, 2)`` array."""
    return np.column_stack([m.data.min(axis=0), m.data.max(axis=0)])


def scale_to_angles(m: FeatureMatrix, bounds=None) -> FeatureMatrix:
    """Affine map of each feature onto [-pi, pi], clipped.

    ``bounds`` defaults to this matrix's own min/max; pass the training bounds
    when scaling test data. Constant features (min == max) map to 0.
    """
    bounds = fit_angle_bounds(m) if bounds is None else np.asarray(bounds, dtype=float)
    if bounds.shape != (m.cols, 2):
        raise DataError(f"bounds shape {bounds.shape} does not match {m.cols} features")
    lo, hi = bounds[:, 0], bounds[:, 1]
    if np.any(lo > hi):
        raise DataError("angle bounds need min <= max")
    span = hi - lo
    flat = span == 0
    unit = (m.data - lo) / np.where(flat, 1.0, span)
    out = np.clip(2.0 * np.pi * unit - np.pi, -np.pi, np.pi)
    out[:, flat] = 0.0
    return FeatureMatrix(out, m.feature_names)


# --- fitted pipeline -------------------------------------------------------


@dataclass
class PreprocessPipeline:
    """Everything needed to map raw rows to angle-scaled feature vectors."""

    window: int
    input_columns: list[str]
    category_tables: dict[str, dict[str, float]]
    scaler: ScalerParams
    ranking: FeatureRanking
    k: int
    angle_bounds: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def selected(self) -> list[str]:
        return [self.input_columns[i] for i in self.ranking.order[: self.k]]

    def transform_smoothed(self, ds: RawDataset) -> FeatureMatrix:
        """Apply every step after smoothing to an already smoothed dataset."""
        if ds.feature_names != self.input_columns:
            raise DataError("dataset columns differ from the fitted pipeline")
        m = FeatureMatrix.from_dataset(encode_categoricals(ds, self.category_tables))
        z = apply_scaler(m, self.scaler)
        return scale_to_angles(select_features(z, self.ranking, self.k), self.angle_bounds)

    def transform(self, ds: RawDataset) -> FeatureMatrix:
        return self.transform_smoothed(smooth_dataset(ds, self.window))

    def to_json(self) -> dict:
        return {
            "window": self.window,
            "input_columns": list(self.input_columns),
            "category_tables": self.category_tables,
            "scaler": {"mu": self.scaler.mu.tolist(), "sigma": self.scaler.sigma.tolist()},
            "ranking": {"order": self.ranking.order.tolist(), "importance": self.ranking.importance.tolist()},
            "k": self.k,
            "selected": self.selected,
            "angle_bounds": self.angle_bounds.tolist(),
            "extra": self.extra,
        }

    @classmethod
    def from_json(cls, doc: dict) -> PreprocessPipeline:
        try:
            return cls(
                window=int(doc["window"]),
                input_columns=list(doc["input_columns"]),
                category_tables=doc["category_tables"],
                scaler=ScalerParams(doc["scaler"]["mu"], doc["scaler"]["sigma"]),
                ranking=FeatureRanking(doc["ranking"]["order"], doc["ranking"]["importance"]),
                k=int(doc["k"]),
                angle_bounds=np.asarray(doc["angle_bounds"], dtype=float).reshape(-1, 2),
                extra=doc.get("extra", {}),
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed pipeline document: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> PreprocessPipeline:
        path = Path(path)
        if not path.is_file():
            raise DataError(f"no such file: {path}")
        return cls.from_json(json.loads(path.read_text(encoding="utf-8")))


def fit_pipeline(
    train: RawDataset,
    rank: RawDataset,
    k: int,
    window: int = DEFAULT_WINDOW,
    max_depth: int = DEFAULT_TREE_DEPTH,
) -> PreprocessPipeline:
    """Fit on smoothed data: encoding and scaler on ``train``, the Gini
    ranking on the labelled ``rank`` slice, angle bounds on ``train`` again."""
    if rank.labels is None:
        raise DataError("the ranking slice must be labelled")
    if rank.feature_names != train.feature_names:
        raise DataError("ranking slice columns differ from the training columns")
    tables = fit_category_tables(train)
    m_train = FeatureMatrix.from_dataset(encode_categoricals(train, tables))
    scaler = fit_scaler(m_train)
    z_train = apply_scaler(m_train, scaler)
    z_rank = apply_scaler(FeatureMatrix.from_dataset(encode_categoricals(rank, tables)), scaler)
    ranking = rank_features(fit_gini_tree(z_rank, rank.labels, max_depth))
    bounds = fit_angle_bounds(select_features(z_train, ranking, k))
    return PreprocessPipeline(window, train.feature_names, tables, scaler, ranking, k, bounds)
