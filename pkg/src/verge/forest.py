"""From-scratch Random Forest and ZeroR classifiers.

Training is fully deterministic: every tree draws from its own RNG stream
seeded by (seed, tree index), so results are independent of any scheduling
and identical across runs. Split search minimises Gini impurity over
midpoint thresholds between consecutive distinct feature values, with ties
broken by lowest feature index, then lowest threshold.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

MODEL_FORMAT_VERSION = 1
DEFAULT_N_TREES = 100
DEFAULT_DEPTH_GRID: tuple[Optional[int], ...] = (4, 8, 12, 16, 24, None)
POSITIVE_LABEL = "internal_thought"


def features_per_split(n_features: int) -> int:
    """Number of candidate features drawn at each node: int(log2(m) + 1)."""
    if n_features < 1:
        raise ValueError("need at least one feature")
    return int(math.log2(n_features) + 1.0)


@dataclass
class _TreeNode:
    feature: int = -1  # -1 marks a leaf
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    counts: Optional[np.ndarray] = None


@dataclass
class DecisionTree:
    nodes: list[_TreeNode] = field(default_factory=list)
    _arrays: Optional[tuple] = field(default=None, repr=False, compare=False)

    def _node_arrays(self) -> tuple:
        if self._arrays is None:
            feat = np.array([nd.feature for nd in self.nodes])
            thr = np.array([nd.threshold for nd in self.nodes])
            left = np.array([nd.left for nd in self.nodes])
            right = np.array([nd.right for nd in self.nodes])
            leaf_pred = np.array(
                [int(np.argmax(nd.counts)) if nd.counts is not None else 0 for nd in self.nodes]
            )
            self._arrays = (feat, thr, left, right, leaf_pred)
        return self._arrays

    def predict_class_index(self, X: np.ndarray) -> np.ndarray:
        """Vectorised descent; returns the argmax class index per row."""
        feat, thr, left, right, leaf_pred = self._node_arrays()
        idx = np.zeros(X.shape[0], dtype=np.int64)
        active = feat[idx] >= 0
        while np.any(active):
            rows = np.flatnonzero(active)
            node = idx[rows]
            go_left = X[rows, feat[node]] <= thr[node]
            idx[rows] = np.where(go_left, left[node], right[node])
            active = feat[idx] >= 0
        return leaf_pred[idx]


def _gini_best_split(
    X: np.ndarray, y: np.ndarray, rows: np.ndarray, feats: np.ndarray, n_classes: int
) -> Optional[tuple[int, float]]:
    """Best (feature, threshold) among the candidates, or None if every
    candidate column is constant on this node."""
    best_gini = np.inf
    best: Optional[tuple[int, float]] = None
    n = rows.size
    y_node = y[rows]
    for f in np.sort(feats):
        x = X[rows, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        ys = y_node[order]
        boundaries = np.flatnonzero(xs[:-1] < xs[1:])
        if boundaries.size == 0:
            continue
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), ys] = 1.0
        cum = np.cumsum(onehot, axis=0)
        total = cum[-1]
        left_counts = cum[boundaries]
        right_counts = total - left_counts
        n_left = boundaries + 1.0
        n_right = n - n_left
        gini_left = 1.0 - np.sum((left_counts / n_left[:, None]) ** 2, axis=1)
        gini_right = 1.0 - np.sum((right_counts / n_right[:, None]) ** 2, axis=1)
        weighted = (n_left * gini_left + n_right * gini_right) / n
        k = int(np.argmin(weighted))  # first minimum: lowest threshold
        if weighted[k] < best_gini:
            best_gini = float(weighted[k])
            b = boundaries[k]
            best = (int(f), float((xs[b] + xs[b + 1]) / 2.0))
    return best


def _build_tree(
    X: np.ndarray,
    y: np.ndarray,
    rows: np.ndarray,
    n_classes: int,
    k_features: int,
    max_depth: Optional[int],
    rng: np.random.Generator,
) -> DecisionTree:
    tree = DecisionTree()

    def leaf(node_rows: np.ndarray) -> int:
        counts = np.bincount(y[node_rows], minlength=n_classes).astype(float)
        tree.nodes.append(_TreeNode(counts=counts))
        return len(tree.nodes) - 1

    def grow(node_rows: np.ndarray, depth: int) -> int:
        if node_rows.size < 2 or (max_depth is not None and depth >= max_depth):
            return leaf(node_rows)
        labels = y[node_rows]
        if np.all(labels == labels[0]):
            return leaf(node_rows)
        feats = rng.choice(X.shape[1], size=min(k_features, X.shape[1]), replace=False)
        split = _gini_best_split(X, y, node_rows, feats, n_classes)
        if split is None:
            return leaf(node_rows)
        f, thr = split
        go_left = X[node_rows, f] <= thr
        tree.nodes.append(_TreeNode(feature=f, threshold=thr))
        me = len(tree.nodes) - 1
        tree.nodes[me].left = grow(node_rows[go_left], depth + 1)
        tree.nodes[me].right = grow(node_rows[~go_left], depth + 1)
        return me

    grow(rows, 0)
    return tree


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    classes: list[str]
    feature_manifest: tuple[str, ...]
    n_trees: int
    max_depth: Optional[int]
    features_per_split: int
    seed: int
    oob_accuracy: Optional[float] = None

    def vote_matrix(self, X: np.ndarray) -> np.ndarray:
        """(n_rows, n_classes) matrix of per-tree vote counts."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.feature_manifest):
            raise ValueError(
                f"expected {len(self.feature_manifest)} features, got {X.shape[1]}"
            )
        if not np.all(np.isfinite(X)):
            raise ValueError("non-finite feature values")
        votes = np.zeros((X.shape[0], len(self.classes)), dtype=np.int64)
        for tree in self.trees:
            pred = tree.predict_class_index(X)
            votes[np.arange(X.shape[0]), pred] += 1
        return votes

    def predict_rows(self, X: np.ndarray) -> tuple[list[str], np.ndarray]:
        votes = self.vote_matrix(X)
        labels = []
        scores = np.empty(votes.shape[0])
        for i, row in enumerate(votes):
            top = int(np.max(row))
            tied = [self.classes[j] for j in np.flatnonzero(row == top)]
            if len(tied) > 1 and POSITIVE_LABEL in tied:
                lab = POSITIVE_LABEL
            else:
                lab = min(tied)
            labels.append(lab)
            scores[i] = row[self.classes.index(lab)] / len(self.trees)
        return labels, scores


def train_forest(
    X: np.ndarray,
    y: Sequence[str],
    feature_names: Sequence[str],
    n_trees: int = DEFAULT_N_TREES,
    max_depth: Optional[int] = None,
    seed: int = 0,
) -> ForestModel:
    """Train a random forest on bootstrap samples of (X, y).

    Raises on non-finite inputs or single-class targets.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError("X must be (n_rows, n_features) matching y")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite feature values")
    classes = sorted(set(y))
    if len(classes) < 2:
        raise ValueError("training data holds a single class")
    class_index = {c: i for i, c in enumerate(classes)}
    yi = np.array([class_index[c] for c in y], dtype=np.int64)
    n, m = X.shape
    k = features_per_split(m)

    trees = []
    oob_votes = np.zeros((n, len(classes)), dtype=np.int64)
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        boot = rng.integers(0, n, size=n)
        tree = _build_tree(X, yi, boot, len(classes), k, max_depth, rng)
        trees.append(tree)
        oob_rows = np.setdiff1d(np.arange(n), boot)
        if oob_rows.size:
            pred = tree.predict_class_index(X[oob_rows])
            oob_votes[oob_rows, pred] += 1

    covered = oob_votes.sum(axis=1) > 0
    if np.any(covered):
        oob_pred = np.argmax(oob_votes[covered], axis=1)
        oob_acc = float(np.mean(oob_pred == yi[covered]))
    else:
        oob_acc = None

    return ForestModel(
        trees=trees,
        classes=classes,
        feature_manifest=tuple(feature_names),
        n_trees=n_trees,
        max_depth=max_depth,
        features_per_split=k,
        seed=seed,
        oob_accuracy=oob_acc,
    )


@dataclass
class ZeroRModel:
    """Baseline that always predicts the training-set majority class."""

    majority: str
    priors: dict[str, float]
    feature_manifest: tuple[str, ...] = ()

    def predict_rows(self, X: np.ndarray) -> tuple[list[str], np.ndarray]:
        X = np.asarray(X, dtype=float)
        n = X.shape[0] if X.ndim == 2 else 1
        return [self.majority] * n, np.full(n, self.priors[self.majority])


def train_zeror(y: Sequence[str], feature_names: Sequence[str] = ()) -> ZeroRModel:
    if not y:
        raise ValueError("empty training labels")
    classes = sorted(set(y))
    counts = {c: 0 for c in classes}
    for lab in y:
        counts[lab] += 1
    # ties resolve to the lexicographically smallest label
    majority = sorted(classes, key=lambda c: (-counts[c], c))[0]
    n = len(y)
    return ZeroRModel(
        majority=majority,
        priors={c: counts[c] / n for c in classes},
        feature_manifest=tuple(feature_names),
    )


def predict(model, x: Sequence[float]) -> tuple[str, float]:
    """Classify one feature vector: (label, score in [0, 1])."""
    labels, scores = model.predict_rows(np.asarray(x, dtype=float)[None, :])
    return labels[0], float(scores[0])


# ---------------------------------------------------------------------------
# Depth tuning


def _stratified_folds(y: np.ndarray, n_folds: int, rng: np.random.Generator) -> np.ndarray:
    """Fold assignment per row, dealing each class round-robin."""
    fold = np.empty(y.shape[0], dtype=np.int64)
    for c in np.unique(y):
        rows = np.flatnonzero(y == c)
        rows = rows[rng.permutation(rows.size)]
        fold[rows] = np.arange(rows.size) % n_folds
    return fold


def tune_depth(
    X: np.ndarray,
    y: Sequence[str],
    grid: Sequence[Optional[int]],
    seed: int,
    n_trees: int = DEFAULT_N_TREES,
    n_folds: int = 5,
) -> Optional[int]:
    """Pick the max depth with the best stratified-CV weighted F1.

    Folds whose training part degenerates to a single class are skipped;
    ties go to the smallest depth (unbounded sorts last).
    """
    from .evaluation import confusion_matrix, weighted_f1

    if not grid:
        raise ValueError("empty depth grid")
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 10:
        raise ValueError("tune_depth needs at least 10 rows")
    classes = sorted(set(y))
    yi = np.array([classes.index(c) for c in y])
    rng = np.random.default_rng([seed, 0x5F01D])
    fold = _stratified_folds(yi, n_folds, rng)

    ordered = sorted(grid, key=lambda d: math.inf if d is None else d)
    best_depth = ordered[0]
    best_score = -math.inf
    for di, depth in enumerate(ordered):
        scores = []
        for f in range(n_folds):
            train_rows = np.flatnonzero(fold != f)
            test_rows = np.flatnonzero(fold == f)
            if train_rows.size == 0 or test_rows.size == 0:
                continue
            y_train = [y[i] for i in train_rows]
            if len(set(y_train)) < 2:
                continue
            model = train_forest(
                X[train_rows], y_train, feature_names=[str(i) for i in range(X.shape[1])],
                n_trees=n_trees, max_depth=depth, seed=seed + 7919 * (f + 1),
            )
            pred, _ = model.predict_rows(X[test_rows])
            truth = [y[i] for i in test_rows]
            cm, labels = confusion_matrix(truth, pred)
            scores.append(weighted_f1(cm))
        if scores:
            score = float(np.mean(scores))
            if score > best_score:
                best_score = score
                best_depth = depth
    return best_depth


# ---------------------------------------------------------------------------
# Serialization


def _tree_to_jsonable(tree: DecisionTree) -> list:
    out = []
    for nd in tree.nodes:
        if nd.feature >= 0:
            out.append({"f": nd.feature, "t": nd.threshold, "l": nd.left, "r": nd.right})
        else:
            out.append({"c": [int(v) for v in nd.counts.tolist()]})
    return out


def _tree_from_jsonable(nodes: list) -> DecisionTree:
    tree = DecisionTree()
    for nd in nodes:
        if "f" in nd:
            tree.nodes.append(_TreeNode(feature=nd["f"], threshold=nd["t"], left=nd["l"], right=nd["r"]))
        else:
            tree.nodes.append(_TreeNode(counts=np.asarray(nd["c"], dtype=float)))
    return tree


def model_to_json(model) -> str:
    if isinstance(model, ZeroRModel):
        doc = {
            "version": MODEL_FORMAT_VERSION,
            "type": "zero_r",
            "classes": sorted(model.priors),
            "majority": model.majority,
            "priors": model.priors,
            "feature_manifest": list(model.feature_manifest),
        }
    elif isinstance(model, ForestModel):
        doc = {
            "version": MODEL_FORMAT_VERSION,
            "type": "random_forest",
            "params": {
                "n_trees": model.n_trees,
                "max_depth": model.max_depth,
                "features_per_split": model.features_per_split,
                "seed": model.seed,
            },
            "classes": model.classes,
            "feature_manifest": list(model.feature_manifest),
            "oob_accuracy": model.oob_accuracy,
            "trees": [_tree_to_jsonable(t) for t in model.trees],
        }
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return json.dumps(doc, sort_keys=True)


def model_from_json(text: str):
    doc = json.loads(text)
    version = doc.get("version")
    if not isinstance(version, int) or version > MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version!r}")
    if doc["type"] == "zero_r":
        return ZeroRModel(
            majority=doc["majority"],
            priors=doc["priors"],
            feature_manifest=tuple(doc["feature_manifest"]),
        )
    if doc["type"] == "random_forest":
        p = doc["params"]
        return ForestModel(
            trees=[_tree_from_jsonable(t) for t in doc["trees"]],
            classes=list(doc["classes"]),
            feature_manifest=tuple(doc["feature_manifest"]),
            n_trees=p["n_trees"],
            max_depth=p["max_depth"],
            features_per_split=p["features_per_split"],
            seed=p["seed"],
            oob_accuracy=doc.get("oob_accuracy"),
        )
    raise ValueError(f"unknown model type {doc['type']!r}")


def save_model(model, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))
        fh.write("\n")


def load_model(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_json(fh.read())
