"""Random-forest classifier (Gini CART trees on bootstrap resamples).

Training is deterministic: tree ``i`` draws its bootstrap sample and its
per-node feature subsets from ``SeedSequence([seed, i])``, and rows are put
in a canonical order first, so neither thread scheduling nor the order of
the training examples affects the result.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._accel import kernels
from .errors import DegenerateData, SchemaMismatch
from .features import FeatureVector

MODEL_FORMAT = "attnforecast-forest/1"


@dataclass(frozen=True)
class Hyperparams:
    n_trees: int = 100
    max_depth: int = 8
    min_samples_leaf: int = 1
    n_features_per_split: int = 1

    def __post_init__(self):
        for k, v in asdict(self).items():
            if int(v) != v or v < 1:
                raise ValueError(f"{k} must be an integer >= 1, got {v}")

    def to_json(self) -> dict:
        return asdict(self)


def default_grid(n_features: int, n_trees: int = 100) -> list[Hyperparams]:
    """max_depth x min_samples_leaf x {sqrt(d), d/3}."""
    m_opts = []
    for m in (round(math.sqrt(n_features)), round(n_features / 3)):
        m = min(max(int(m), 1), n_features)
        if m not in m_opts:
            m_opts.append(m)
    return [Hyperparams(n_trees, depth, leaf, m)
            for depth in (4, 8, 16) for leaf in (1, 5, 20) for m in m_opts]


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Tree):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("feature", "threshold", "left", "right", "counts"))

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def depth(self) -> int:
        d = np.zeros(self.n_nodes, dtype=np.int64)
        for k in range(self.n_nodes):
            if self.feature[k] >= 0:
                d[self.left[k]] = d[self.right[k]] = d[k] + 1
        return int(d.max()) if self.n_nodes else 0

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    def to_json(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "counts": self.counts.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "Tree":
        return cls(np.array(d["feature"], dtype=np.int64), np.array(d["threshold"], dtype=float),
                   np.array(d["left"], dtype=np.int64), np.array(d["right"], dtype=np.int64),
                   np.array(d["counts"], dtype=np.int64).reshape(-1, 2))


@dataclass(frozen=True, eq=False)
class Forest:
    trees: tuple[Tree, ...]
    feature_names: tuple[str, ...]
    seed: int
    hyperparams: Hyperparams

    def __eq__(self, other):
        if not isinstance(other, Forest):
            return NotImplemented
        return (self.feature_names == other.feature_names and self.seed == other.seed
                and self.hyperparams == other.hyperparams and self.trees == other.trees)

    def packed(self):
        """Trees concatenated into flat arrays for the prediction kernel."""
        cached = self.__dict__.get("_packed")
        if cached is not None:
            return cached
        offs = np.cumsum([0] + [t.n_nodes for t in self.trees])
        feature = np.concatenate([t.feature for t in self.trees])
        threshold = np.concatenate([t.threshold for t in self.trees])
        left = np.concatenate([np.where(t.left >= 0, t.left + o, -1) for t, o in zip(self.trees, offs)])
        right = np.concatenate([np.where(t.right >= 0, t.right + o, -1) for t, o in zip(self.trees, offs)])
        counts = np.concatenate([t.counts for t in self.trees])
        vote = (counts[:, 1] > counts[:, 0]).astype(np.int64)
        packed = (feature, threshold, left, right, vote, offs[:-1].astype(np.int64))
        object.__setattr__(self, "_packed", packed)
        return packed

    def to_json(self) -> dict:
        return {"format": MODEL_FORMAT, "seed": self.seed, "hyperparams": self.hyperparams.to_json(),
                "feature_names": list(self.feature_names), "trees": [t.to_json() for t in self.trees]}

    @classmethod
    def from_json(cls, d: dict) -> "Forest":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a forest model file (format={d.get('format')!r})")
        return cls(tuple(Tree.from_json(t) for t in d["trees"]), tuple(d["feature_names"]),
                   int(d["seed"]), Hyperparams(**d["hyperparams"]))

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        doc = self.to_json()
        if extra:
            doc = {**extra, **doc}
        Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Forest":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row permutation that depends only on row content: label first, then
    the big-endian bytes of the feature values. Training on any row
    permutation of the same data therefore yields the same forest."""
    n = X.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    raw = np.concatenate([np.asarray(y, dtype=">i8").reshape(n, 1).view(np.uint8),
                          np.ascontiguousarray(X, dtype=">f8").view(np.uint8).reshape(n, -1)], axis=1)
    rows = np.ascontiguousarray(raw).view(np.dtype((np.void, raw.shape[1]))).ravel()
    return np.argsort(rows, kind="stable").astype(np.int64)


def _tree_stream(seed: int, index: int):
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(index)])
    key = int(ss.generate_state(1, dtype=np.uint64)[0])
    return key, np.random.default_rng(ss)


def _fit_tree(prep, y, seed, index, hp: Hyperparams) -> Tree:
    key, rng = _tree_stream(seed, index)
    n = y.shape[0]
    boot = np.sort(rng.integers(0, n, size=n)).astype(np.int64)
    out = kernels.grow_tree(prep, y, boot, np.uint64(key), int(hp.max_depth),
                            int(hp.min_samples_leaf), int(hp.n_features_per_split))
    return Tree(*out)


def fit_arrays(X: np.ndarray, y: np.ndarray, hp: Hyperparams, seed: int,
               feature_names: Sequence[str] | None = None, workers: int = 1) -> Forest:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DegenerateData("cannot train on zero examples")
    if y.shape[0] != X.shape[0]:
        raise ValueError("X and y differ in length")
    if not np.all(np.isfinite(X)):
        raise DegenerateData("training features contain NaN or infinity")
    if hp.n_features_per_split > X.shape[1]:
        raise ValueError(f"n_features_per_split={hp.n_features_per_split} exceeds {X.shape[1]} features")
    order = canonical_order(X, y)
    # Feature-major copy: split search reads one feature at a time.
    Xc = kernels.prepare_matrix(X[order].T)
    yc = np.ascontiguousarray(y[order])
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            trees = list(pool.map(lambda i: _fit_tree(Xc, yc, seed, i, hp), range(hp.n_trees)))
    else:
        trees = [_fit_tree(Xc, yc, seed, i, hp) for i in range(hp.n_trees)]
    names = tuple(feature_names) if feature_names is not None else tuple(f"f{j}" for j in range(X.shape[1]))
    return Forest(tuple(trees), names, int(seed), hp)


def train(examples, hp: Hyperparams, seed: int, workers: int = 1) -> Forest:
    """Fit a forest on labelled examples (objects with ``features`` and ``label``)."""
    if not examples:
        raise DegenerateData("cannot train on zero examples")
    names = examples[0].features.names
    for e in examples:
        if e.features.names != names:
            raise SchemaMismatch("training examples have differing feature schemas")
    X = np.stack([e.features.values for e in examples])
    y = np.array([int(e.label) for e in examples], dtype=np.int64)
    return fit_arrays(X, y, hp, seed, names, workers)


def predict_scores(forest: Forest, X: np.ndarray) -> np.ndarray:
    """Fraction of trees voting for the positive class, per row."""
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    if X.ndim != 2 or X.shape[1] != len(forest.feature_names):
        raise SchemaMismatch(f"expected {len(forest.feature_names)} features, got shape {X.shape}")
    votes = kernels.predict_votes(X, *forest.packed())
    return votes / len(forest.trees)


def predict_labels(forest: Forest, X: np.ndarray) -> np.ndarray:
    return predict_scores(forest, X) > 0.5


def predict(forest: Forest, fv: FeatureVector) -> dict:
    """Majority vote; ties go to the negative class."""
    if tuple(fv.names) != forest.feature_names:
        raise SchemaMismatch("feature vector schema does not match the forest")
    score = float(predict_scores(forest, fv.values[None, :])[0])
    return {"label": score > 0.5, "score": score}


def group_kfold(groups: Sequence[str], k: int) -> list[np.ndarray]:
    """Fold id per row; whole groups per fold, assigned round-robin in sorted order.

    Falls back to round-robin over rows when there are fewer than two groups.
    """
    groups = list(groups)
    uniq = sorted(set(groups))
    if len(uniq) >= 2:
        k_eff = min(k, len(uniq))
        gid = {g: i % k_eff for i, g in enumerate(uniq)}
        fold = np.array([gid[g] for g in groups], dtype=np.int64)
    else:
        k_eff = min(k, len(groups))
        fold = np.arange(len(groups)) % max(k_eff, 1)
    return [np.flatnonzero(fold == f) for f in range(k_eff)]


def tune(train_examples, grid: Sequence[Hyperparams], k: int = 3, seed: int = 0,
         workers: int = 1) -> Hyperparams:
    """Grid point with the best mean inner-CV weighted F1; ties keep grid order.

    Inner folds hold out whole participants.
    """
    from .evaluation import weighted_f1

    if not grid:
        raise ValueError("empty hyperparameter grid")
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(grid) == 1:
        return grid[0]
    X = np.stack([e.features.values for e in train_examples])
    y = np.array([int(e.label) for e in train_examples], dtype=np.int64)
    folds = group_kfold([e.participant_id for e in train_examples], k)
    best, best_hp = -math.inf, grid[0]
    for hp in grid:
        scores = []
        for f, test_idx in enumerate(folds):
            mask = np.ones(len(y), dtype=bool)
            mask[test_idx] = False
            if not mask.any() or test_idx.size == 0:
                continue
            forest = fit_arrays(X[mask], y[mask], hp, seed + 7919 * (f + 1), workers=workers)
            pred = predict_labels(forest, X[test_idx])
            scores.append(weighted_f1(pred.tolist(), (y[test_idx] == 1).tolist()))
        score = float(np.mean(scores)) if scores else -math.inf
        if score > best:
            best, best_hp = score, hp
    return best_hp
