"""Data-rate regression from passive indicators and payload size.

Two learners are provided: an ordinary-least-squares linear baseline and a
model tree that splits on standard-deviation reduction and fits a linear
model in every leaf, with error-based post-pruning.  The trained model can
serve as the metric source of the predicted-rate transmission policy.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

BASE_FEATURES = ("rsrp", "rsrq", "snr", "cqi", "payload_bytes")
SPEED_FEATURE = "speed"

# Splitting stops once a node's label spread falls below this share of the
# root node's spread.
SD_STOP_FRACTION = 0.05
DEFAULT_PRUNING_FACTOR = 2.0

MODEL_FILE_MAGIC = "catsim-model v1"

# Column mapping used when training from simulator transfer logs or external
# measurement CSVs with the same layout.
DATASET_COLUMNS = {
    "rsrp": "rsrp_dbm",
    "rsrq": "rsrq_db",
    "snr": "snr_db",
    "cqi": "cqi",
    "payload_bytes": "bytes",
}
DATASET_LABEL_COLUMN = "goodput_mbps"


@dataclass(frozen=True)
class FeatureVector:
    rsrp: float
    rsrq: float
    snr: float
    cqi: int
    payload_bytes: float
    speed: float | None = None

    def __post_init__(self) -> None:
        if self.payload_bytes <= 0:
            raise ValueError(f"payload_bytes must be > 0, got {self.payload_bytes}")
        if int(self.cqi) != self.cqi or not 0 <= self.cqi <= 15:
            raise ValueError(f"cqi must be an integer in [0, 15], got {self.cqi}")

    def value(self, feature: str) -> float:
        v = getattr(self, feature)
        if v is None:
            raise ValueError(f"feature {feature!r} absent from feature vector")
        return float(v)


@dataclass(frozen=True)
class LabeledSample:
    features: FeatureVector
    rate: float  # MBit/s

    def __post_init__(self) -> None:
        if not math.isfinite(self.rate) or self.rate < 0:
            raise ValueError(f"rate must be finite and >= 0, got {self.rate}")


@dataclass
class LinearModel:
    """Linear form over a fixed feature list; dropped columns keep coefficient 0."""

    feature_names: tuple[str, ...]
    coefficients: tuple[float, ...]
    intercept: float
    n_params: int = 1  # intercept + retained columns, used by tree pruning

    def evaluate(self, values: Sequence[float]) -> float:
        return self.intercept + float(np.dot(self.coefficients, values))


@dataclass
class TreeNode:
    n_samples: int
    feature: str | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    model: LinearModel | None = None

    @property
    def is_leaf(self) -> bool:
        return self.model is not None and self.left is None


@dataclass
class ModelTree:
    root: TreeNode
    feature_names: tuple[str, ...]
    min_leaf_size: int
    pruning_factor: float = DEFAULT_PRUNING_FACTOR

    def leaves(self) -> list[TreeNode]:
        out: list[TreeNode] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.extend((node.right, node.left))  # type: ignore[arg-type]
        return out


@dataclass(frozen=True)
class EvalMetrics:
    """Prediction quality; correlation is NaN when either series is constant."""

    correlation: float
    mae: float
    rmse: float


def _design(dataset: Sequence[LabeledSample]) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    if not dataset:
        raise ValueError("dataset is empty")
    names: tuple[str, ...] = BASE_FEATURES
    if all(s.features.speed is not None for s in dataset):
        names = BASE_FEATURES + (SPEED_FEATURE,)
    X = np.array([[s.features.value(f) for f in names] for s in dataset], dtype=float)
    y = np.array([s.rate for s in dataset], dtype=float)
    return X, y, names


def _fit_ols(
    X: np.ndarray, y: np.ndarray, feature_names: tuple[str, ...], warn_on_drop: bool = False
) -> LinearModel:
    """OLS with intercept; dependent columns are dropped, not regularized."""
    n = len(y)
    A = np.column_stack([np.ones(n), X])
    rank = np.linalg.matrix_rank(A)
    keep = list(range(A.shape[1]))
    if rank < A.shape[1]:
        keep = [0]
        for j in range(1, A.shape[1]):
            trial = keep + [j]
            if np.linalg.matrix_rank(A[:, trial]) > len(keep):
                keep.append(j)
        if warn_on_drop:
            dropped = [feature_names[j - 1] for j in range(1, A.shape[1]) if j not in keep]
            warnings.warn(
                f"design matrix is rank deficient; dropped dependent columns: {dropped}",
                stacklevel=3,
            )
    beta_kept, *_ = np.linalg.lstsq(A[:, keep], y, rcond=None)
    beta = np.zeros(A.shape[1])
    beta[keep] = beta_kept
    return LinearModel(
        feature_names=feature_names,
        coefficients=tuple(float(b) for b in beta[1:]),
        intercept=float(beta[0]),
        n_params=len(keep),
    )


def train_linear(dataset: Sequence[LabeledSample]) -> LinearModel:
    """Ordinary-least-squares fit of the rate on all features."""
    X, y, names = _design(dataset)
    if len(dataset) < len(names) + 1:
        raise ValueError(
            f"need at least {len(names) + 1} samples for {len(names)} features, "
            f"got {len(dataset)}"
        )
    return _fit_ols(X, y, names, warn_on_drop=True)


def _sd(y: np.ndarray) -> float:
    return float(y.std())


def _best_split(
    X: np.ndarray, y: np.ndarray, min_leaf_size: int
) -> tuple[int, float, float] | None:
    """Maximize standard-deviation reduction over all (feature, threshold) pairs.

    Returns (feature index, threshold, sdr) or None if no split keeps both
    children at ``min_leaf_size`` samples.  Ties resolve to the lowest feature
    index, then the lowest threshold, so training is deterministic.
    """
    n = len(y)
    sd_all = _sd(y)
    best: tuple[int, float, float] | None = None
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = y[order]
        cum1 = np.cumsum(ys)
        cum2 = np.cumsum(ys * ys)
        ks = np.arange(min_leaf_size, n - min_leaf_size + 1)
        if len(ks) == 0:
            continue
        valid = xs[ks - 1] < xs[ks]
        ks = ks[valid]
        if len(ks) == 0:
            continue
        nl = ks.astype(float)
        nr = n - nl
        var_l = np.maximum(cum2[ks - 1] / nl - (cum1[ks - 1] / nl) ** 2, 0.0)
        var_r = np.maximum(
            (cum2[-1] - cum2[ks - 1]) / nr - ((cum1[-1] - cum1[ks - 1]) / nr) ** 2, 0.0
        )
        sdr = sd_all - (nl * np.sqrt(var_l) + nr * np.sqrt(var_r)) / n
        k_best = int(np.argmax(sdr))
        thr = 0.5 * (xs[ks[k_best] - 1] + xs[ks[k_best]])
        cand = (j, float(thr), float(sdr[k_best]))
        if best is None or cand[2] > best[2]:
            best = cand
    return best


def _error_penalty(n: int, n_params: int, pruning_factor: float) -> float:
    v = pruning_factor * n_params
    if n <= v:
        return math.inf
    return (n + v) / (n - v)


def _leaf_mae(model: LinearModel, X: np.ndarray, y: np.ndarray) -> float:
    preds = np.maximum(model.intercept + X @ np.asarray(model.coefficients), 0.0)
    return float(np.mean(np.abs(preds - y)))


def _build(
    X: np.ndarray,
    y: np.ndarray,
    names: tuple[str, ...],
    min_leaf_size: int,
    root_sd: float,
) -> TreeNode:
    n = len(y)
    if n < 2 * min_leaf_size or _sd(y) < SD_STOP_FRACTION * root_sd:
        return TreeNode(n_samples=n, model=_fit_ols(X, y, names))
    split = _best_split(X, y, min_leaf_size)
    if split is None or split[2] <= 0.0:
        return TreeNode(n_samples=n, model=_fit_ols(X, y, names))
    j, thr, _ = split
    mask = X[:, j] <= thr
    return TreeNode(
        n_samples=n,
        feature=names[j],
        threshold=thr,
        left=_build(X[mask], y[mask], names, min_leaf_size, root_sd),
        right=_build(X[~mask], y[~mask], names, min_leaf_size, root_sd),
    )


def _prune(
    node: TreeNode,
    X: np.ndarray,
    y: np.ndarray,
    names: tuple[str, ...],
    pruning_factor: float,
) -> tuple[TreeNode, float]:
    """Bottom-up: collapse a subtree when a single leaf estimates no worse."""
    if node.is_leaf:
        est = _leaf_mae(node.model, X, y) * _error_penalty(
            len(y), node.model.n_params, pruning_factor
        )
        return node, est
    j = names.index(node.feature)
    mask = X[:, j] <= node.threshold
    node.left, est_l = _prune(node.left, X[mask], y[mask], names, pruning_factor)
    node.right, est_r = _prune(node.right, X[~mask], y[~mask], names, pruning_factor)
    n = len(y)
    subtree_est = (mask.sum() * est_l + (~mask).sum() * est_r) / n
    candidate = _fit_ols(X, y, names)
    cand_est = _leaf_mae(candidate, X, y) * _error_penalty(
        n, candidate.n_params, pruning_factor
    )
    if cand_est <= subtree_est:
        return TreeNode(n_samples=n, model=candidate), cand_est
    return node, subtree_est


def train_model_tree(
    dataset: Sequence[LabeledSample],
    min_leaf_size: int | None = None,
    pruning_factor: float = DEFAULT_PRUNING_FACTOR,
) -> ModelTree:
    """Grow and prune a model tree on the labeled samples.

    ``min_leaf_size`` defaults to twice the feature count, the minimum the
    leaf linear models need to stay overdetermined.
    """
    X, y, names = _design(dataset)
    if min_leaf_size is None:
        min_leaf_size = 2 * len(names)
    if min_leaf_size < 2 * len(names):
        raise ValueError(
            f"min_leaf_size must be >= {2 * len(names)} (2x feature count), "
            f"got {min_leaf_size}"
        )
    root = _build(X, y, names, min_leaf_size, _sd(y))
    root, _ = _prune(root, X, y, names, pruning_factor)
    return ModelTree(
        root=root,
        feature_names=names,
        min_leaf_size=min_leaf_size,
        pruning_factor=pruning_factor,
    )


def predict(model: ModelTree | LinearModel, features: FeatureVector) -> float:
    """Predicted data rate in MBit/s, clamped to be non-negative."""
    if isinstance(model, LinearModel):
        values = [features.value(f) for f in model.feature_names]
        return max(0.0, model.evaluate(values))
    node = model.root
    while not node.is_leaf:
        if features.value(node.feature) <= node.threshold:
            node = node.left
        else:
            node = node.right
    values = [features.value(f) for f in model.feature_names]
    return max(0.0, node.model.evaluate(values))


def eval_metrics(predictions: Sequence[float], actuals: Sequence[float]) -> EvalMetrics:
    """Pearson correlation, MAE and RMSE of a prediction series."""
    p = np.asarray(predictions, dtype=float)
    a = np.asarray(actuals, dtype=float)
    if len(p) == 0 or len(p) != len(a):
        raise ValueError(f"need equal non-empty series, got {len(p)} vs {len(a)}")
    err = p - a
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err * err)))
    if p.std() == 0.0 or a.std() == 0.0:
        corr = math.nan
    else:
        corr = float(np.corrcoef(p, a)[0, 1])
    return EvalMetrics(correlation=corr, mae=mae, rmse=rmse)


def cross_validate(
    dataset: Sequence[LabeledSample],
    k: int,
    learner: str = "model_tree",
    seed: int = 0,
    min_leaf_size: int | None = None,
) -> EvalMetrics:
    """k-fold cross validation with a seeded shuffle.

    Folds differ in size by at most one sample; metrics are computed over the
    concatenation of all held-out predictions.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if len(dataset) < k:
        raise ValueError(f"dataset size {len(dataset)} is below k = {k}")
    if learner not in ("model_tree", "linear"):
        raise ValueError(f"unknown learner {learner!r}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(dataset))
    folds = np.array_split(perm, k)
    preds: list[float] = []
    actuals: list[float] = []
    for i in range(k):
        held = folds[i]
        train_idx = np.concatenate([folds[j] for j in range(k) if j != i])
        train_set = [dataset[t] for t in train_idx]
        if learner == "linear":
            model: ModelTree | LinearModel = train_linear(train_set)
        else:
            model = train_model_tree(train_set, min_leaf_size=min_leaf_size)
        for t in held:
            preds.append(predict(model, dataset[t].features))
            actuals.append(dataset[t].rate)
    return eval_metrics(preds, actuals)


# ---------------------------------------------------------------------------
# Model serialization: plain text, pre-order node records, repr'd decimals.


def _write_node(node: TreeNode, lines: list[str]) -> None:
    if node.is_leaf:
        coef = " ".join(repr(c) for c in node.model.coefficients)
        lines.append(
            f"leaf {node.n_samples} {node.model.n_params} {repr(node.model.intercept)} {coef}"
        )
    else:
        lines.append(f"split {node.feature} {repr(node.threshold)} {node.n_samples}")
        _write_node(node.left, lines)
        _write_node(node.right, lines)


def save_model(model: ModelTree | LinearModel, destination: IO[str] | str) -> None:
    if isinstance(destination, str):
        with open(destination, "w") as fh:
            save_model(model, fh)
        return
    lines = [MODEL_FILE_MAGIC]
    if isinstance(model, LinearModel):
        lines.append("type linear")
        lines.append("features " + ",".join(model.feature_names))
        coef = " ".join(repr(c) for c in model.coefficients)
        lines.append(f"leaf 0 {model.n_params} {repr(model.intercept)} {coef}")
    else:
        lines.append("type model_tree")
        lines.append("features " + ",".join(model.feature_names))
        lines.append(f"min_leaf_size {model.min_leaf_size}")
        lines.append(f"pruning_factor {repr(model.pruning_factor)}")
        _write_node(model.root, lines)
    destination.write("\n".join(lines) + "\n")


def _parse_leaf(parts: list[str], names: tuple[str, ...]) -> TreeNode:
    n_samples, n_params = int(parts[1]), int(parts[2])
    numbers = [float(x) for x in parts[3:]]
    if len(numbers) != len(names) + 1:
        raise ValueError(f"leaf record has {len(numbers) - 1} coefficients, expected {len(names)}")
    model = LinearModel(
        feature_names=names,
        coefficients=tuple(numbers[1:]),
        intercept=numbers[0],
        n_params=n_params,
    )
    return TreeNode(n_samples=n_samples, model=model)


def load_model(source: IO[str] | str) -> ModelTree | LinearModel:
    if isinstance(source, str):
        with open(source, "r") as fh:
            return load_model(fh)
    lines = [ln.strip() for ln in source.read().splitlines() if ln.strip()]
    if not lines or lines[0] != MODEL_FILE_MAGIC:
        raise ValueError("not a recognized model file")
    header: dict[str, str] = {}
    body_start = 1
    for i, ln in enumerate(lines[1:], start=1):
        key = ln.split(" ", 1)[0]
        if key in ("type", "features", "min_leaf_size", "pruning_factor"):
            header[key] = ln.split(" ", 1)[1]
            body_start = i + 1
        else:
            break
    names = tuple(header["features"].split(","))
    records = [ln.split() for ln in lines[body_start:]]
    if header["type"] == "linear":
        leaf = _parse_leaf(records[0], names)
        return leaf.model
    pos = 0

    def read_node() -> TreeNode:
        nonlocal pos
        parts = records[pos]
        pos += 1
        if parts[0] == "leaf":
            return _parse_leaf(parts, names)
        if parts[0] != "split":
            raise ValueError(f"unexpected record {parts[0]!r} in model file")
        node = TreeNode(
            n_samples=int(parts[3]), feature=parts[1], threshold=float(parts[2])
        )
        node.left = read_node()
        node.right = read_node()
        return node

    root = read_node()
    return ModelTree(
        root=root,
        feature_names=names,
        min_leaf_size=int(header.get("min_leaf_size", 0)),
        pruning_factor=float(header.get("pruning_factor", DEFAULT_PRUNING_FACTOR)),
    )


def load_dataset(source: IO[str] | str) -> list[LabeledSample]:
    """Read labeled samples from a transfer log or measurement CSV.

    Expects the per-transfer log schema (``rsrp_dbm``, ``rsrq_db``,
    ``snr_db``, ``cqi``, ``bytes``, ``goodput_mbps``); extra columns are
    ignored.
    """
    if isinstance(source, str):
        with open(source, "r", newline="") as fh:
            return load_dataset(fh)
    raw = source.read()
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    reader = csv.DictReader(io.StringIO(raw))
    if reader.fieldnames is None:
        raise ValueError("dataset file has no header")
    missing = [
        c for c in list(DATASET_COLUMNS.values()) + [DATASET_LABEL_COLUMN]
        if c not in reader.fieldnames
    ]
    if missing:
        raise ValueError(f"dataset file is missing columns: {missing}")
    samples = []
    for row_no, row in enumerate(reader, start=2):
        try:
            fv = FeatureVector(
                rsrp=float(row[DATASET_COLUMNS["rsrp"]]),
                rsrq=float(row[DATASET_COLUMNS["rsrq"]]),
                snr=float(row[DATASET_COLUMNS["snr"]]),
                cqi=int(float(row[DATASET_COLUMNS["cqi"]])),
                payload_bytes=float(row[DATASET_COLUMNS["payload_bytes"]]),
            )
            samples.append(LabeledSample(fv, rate=float(row[DATASET_LABEL_COLUMN])))
        except (ValueError, TypeError) as exc:
            raise ValueError(f"bad dataset row {row_no}: {exc}") from None
    if not samples:
        raise ValueError("dataset file contains no rows")
    return samples
