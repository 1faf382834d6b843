"""Random-forest baseline: bootstrap CART trees on Gini impurity.

Split search per node: draw ``features_per_split`` features without
replacement, visit them in ascending index order, and for each try every
midpoint between consecutive distinct sorted values. A candidate replaces the
current best only if its weighted child impurity is lower by more than
``TIE_TOL``, so ties go to the lowest feature index, then the lowest
threshold. Rows with ``x <= threshold`` go left.

A node becomes a leaf when it reaches ``max_depth``, holds fewer than
``min_samples`` rows, is pure, or none of its sampled features varies.
Leaves store the class-1 fraction of their (bootstrap) training rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from numba import njit

from .data.dataset import LabeledDataset
from .nn import serialize as ser

TIE_TOL = 1e-12


class ForestError(ValueError):
    pass


def gini(counts: Sequence[float]) -> float:
    """1 - sum_c (n_c / n)^2."""
    c = np.asarray(counts, dtype=np.float64)
    if c.size == 0 or np.any(c < 0):
        raise ValueError("counts must be non-negative")
    n = c.sum()
    if n == 0:
        raise ValueError("counts are all zero")
    return float(1.0 - np.sum((c / n) ** 2))


@dataclass(frozen=True)
class RfConfig:
    n_trees: int = 300
    max_depth: int = 12
    min_samples: Union[int, float] = 5  # int: row count; float in (0, 1): fraction of training rows
    features_per_split: Optional[int] = None  # None: ceil(sqrt(d))
    bootstrap: bool = True
    weighted_gini: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if isinstance(self.min_samples, float) and not self.min_samples.is_integer():
            if not 0.0 < self.min_samples < 1.0:
                raise ValueError("fractional min_samples must lie in (0, 1)")
        elif int(self.min_samples) < 1:
            raise ValueError("min_samples must be >= 1")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be >= 1")

    def resolve_min_samples(self, n_train: int) -> int:
        m = self.min_samples
        if isinstance(m, float) and not m.is_integer():
            return max(1, math.ceil(m * n_train))
        return int(m)

    def resolve_features(self, d: int) -> int:
        k = self.features_per_split or math.ceil(math.sqrt(d))
        return min(k, d)


@dataclass
class DecisionTree:
    feature: np.ndarray  # int32, -1 at leaves
    threshold: np.ndarray  # float64
    left: np.ndarray  # int32, -1 at leaves
    right: np.ndarray  # int32
    value: np.ndarray  # float64 class-1 fraction
    n_samples: np.ndarray  # int64
    depth: np.ndarray  # int32

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def is_leaf(self) -> np.ndarray:
        return self.left < 0

    @property
    def max_depth_reached(self) -> int:
        return int(self.depth.max())

    def predict(self, x: np.ndarray) -> np.ndarray:
        return _predict_tree(np.ascontiguousarray(x, dtype=np.float64), self.feature, self.threshold, self.left, self.right, self.value)


@dataclass
class RandomForest:
    trees: list[DecisionTree]
    n_features: int
    config: RfConfig


@njit(cache=True)
def _node_score(l0, l1, r0, r1):
    # weighted child Gini: sum_child (n_child - sum_c n_c^2 / n_child) / n_parent
    nl = l0 + l1
    nr = r0 + r1
    s = 0.0
    if nl > 0:
        s += nl - (l0 * l0 + l1 * l1) / nl
    if nr > 0:
        s += nr - (r0 * r0 + r1 * r1) / nr
    return s / (nl + nr)


@njit(cache=True)
def _build_tree(X, y, rows, k, max_depth, min_samples, w0, w1, rng_seed, tie_tol):
    np.random.seed(rng_seed)
    n_total = rows.size
    d = X.shape[1]
    cap = 2 * n_total + 1
    feature = np.full(cap, -1, np.int32)
    threshold = np.zeros(cap, np.float64)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    value = np.zeros(cap, np.float64)
    n_samples = np.zeros(cap, np.int64)
    depth_arr = np.zeros(cap, np.int32)

    idx = rows.copy()
    perm = np.arange(d)
    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    top = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n_total
    top = 1
    next_id = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        n = end - start
        dep = depth_arr[node]
        pos = 0
        for i in range(start, end):
            pos += y[idx[i]]
        n_samples[node] = n
        value[node] = pos / n
        if dep >= max_depth or n < min_samples or pos == 0 or pos == n:
            continue

        # partial Fisher-Yates: first k entries of perm become the sampled features
        for i in range(k):
            j = i + int(np.random.random() * (d - i))
            if j >= d:
                j = d - 1
            tmp = perm[i]
            perm[i] = perm[j]
            perm[j] = tmp
        chosen = np.sort(perm[:k].copy())

        best_score = np.inf
        best_f = -1
        best_thr = 0.0
        vals = np.empty(n, np.float64)
        labs = np.empty(n, np.int64)
        tot1 = pos * w1
        tot0 = (n - pos) * w0
        for fi in range(k):
            f = chosen[fi]
            for i in range(n):
                vals[i] = X[idx[start + i], f]
            order = np.argsort(vals, kind="mergesort")
            sv = vals[order]
            for i in range(n):
                labs[i] = y[idx[start + order[i]]]
            l0 = 0.0
            l1 = 0.0
            for i in range(n - 1):
                if labs[i] == 1:
                    l1 += w1
                else:
                    l0 += w0
                if sv[i] == sv[i + 1]:
                    continue
                score = _node_score(l0, l1, tot0 - l0, tot1 - l1)
                if score < best_score - tie_tol:
                    best_score = score
                    best_f = f
                    thr = 0.5 * (sv[i] + sv[i + 1])
                    if thr >= sv[i + 1]:
                        thr = sv[i]
                    best_thr = thr
        if best_f < 0:
            continue

        # partition idx[start:end] in place: x <= thr to the front
        lo = start
        hi = end - 1
        while lo <= hi:
            if X[idx[lo], best_f] <= best_thr:
                lo += 1
            else:
                tmp = idx[lo]
                idx[lo] = idx[hi]
                idx[hi] = tmp
                hi -= 1
        feature[node] = best_f
        threshold[node] = best_thr
        lid = next_id
        rid = next_id + 1
        next_id += 2
        left[node] = lid
        right[node] = rid
        depth_arr[lid] = dep + 1
        depth_arr[rid] = dep + 1
        st_node[top] = rid
        st_start[top] = lo
        st_end[top] = end
        top += 1
        st_node[top] = lid
        st_start[top] = start
        st_end[top] = lo
        top += 1

    m = next_id
    return feature[:m].copy(), threshold[:m].copy(), left[:m].copy(), right[:m].copy(), value[:m].copy(), n_samples[:m].copy(), depth_arr[:m].copy()


@njit(cache=True)
def _predict_tree(X, feature, threshold, left, right, value):
    out = np.empty(X.shape[0], np.float64)
    for r in range(X.shape[0]):
        node = 0
        while left[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out


def fit_tree(
    x: np.ndarray,
    y: np.ndarray,
    rows: np.ndarray,
    features_per_split: int,
    max_depth: int,
    min_samples: int,
    weights: tuple[float, float] = (1.0, 1.0),
    rng_seed: int = 0,
) -> DecisionTree:
    """Grow one tree on ``rows`` (indices into x, repeats allowed)."""
    arrays = _build_tree(
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.int64),
        np.ascontiguousarray(rows, dtype=np.int64),
        int(features_per_split),
        int(max_depth),
        int(min_samples),
        float(weights[0]),
        float(weights[1]),
        int(rng_seed),
        TIE_TOL,
    )
    return DecisionTree(*arrays)


def fit_forest(data: Union[LabeledDataset, tuple[np.ndarray, np.ndarray]], cfg: RfConfig = RfConfig()) -> RandomForest:
    if isinstance(data, LabeledDataset):
        x, y = data.train()
    else:
        x, y = data
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y).astype(np.int64).ravel()
    if x.ndim != 2 or x.shape[0] == 0:
        raise ForestError("empty training data")
    if x.shape[0] != y.size:
        raise ForestError("feature and label row counts differ")
    n, d = x.shape
    k = cfg.resolve_features(d)
    min_samples = cfg.resolve_min_samples(n)
    weights = (1.0, 1.0)
    if cfg.weighted_gini:
        n1 = int(y.sum())
        if 0 < n1 < n:
            weights = (n / (n - n1), n / n1)

    trees = []
    for child in np.random.SeedSequence(cfg.seed).spawn(cfg.n_trees):
        rng = np.random.default_rng(child)
        rows = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
        tree_seed = int(rng.integers(0, 2**31 - 1))
        trees.append(fit_tree(x, y, rows, k, cfg.max_depth, min_samples, weights, tree_seed))
    return RandomForest(trees, d, cfg)


def predict_proba_rf(forest: RandomForest, x: np.ndarray, n_trees: Optional[int] = None) -> np.ndarray:
    """Mean leaf class-1 fraction across the first ``n_trees`` trees (all by default)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != forest.n_features:
        raise ForestError(f"expected input with {forest.n_features} columns, got shape {x.shape}")
    trees = forest.trees[: n_trees or len(forest.trees)]
    total = np.zeros(x.shape[0])
    for tree in trees:
        total += tree.predict(x)
    return total / len(trees)


_NODE_FIELDS = ("feature", "threshold", "left", "right", "value", "n_samples", "depth")


def to_container(forest: RandomForest, meta: Optional[dict] = None) -> ser.Container:
    meta = dict(meta or {})
    cfg = forest.config
    meta.update(
        n_features=forest.n_features,
        rf_config={
            "n_trees": cfg.n_trees,
            "max_depth": cfg.max_depth,
            "min_samples": cfg.min_samples,
            "features_per_split": cfg.features_per_split,
            "bootstrap": cfg.bootstrap,
            "weighted_gini": cfg.weighted_gini,
            "seed": cfg.seed,
        },
    )
    sizes = np.array([t.n_nodes for t in forest.trees], dtype=np.int64)
    arrays = {"tree_sizes": sizes}
    for name in _NODE_FIELDS:
        arrays[name] = np.concatenate([getattr(t, name) for t in forest.trees])
    return ser.Container(ser.KIND_FOREST, meta, [], arrays)


def from_container(c: ser.Container) -> RandomForest:
    bounds = np.concatenate([[0], np.cumsum(c.arrays["tree_sizes"])])
    trees = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        trees.append(DecisionTree(*(c.arrays[name][a:b].copy() for name in _NODE_FIELDS)))
    return RandomForest(trees, int(c.meta["n_features"]), RfConfig(**c.meta["rf_config"]))


def save_forest(path, forest: RandomForest, meta: Optional[dict] = None) -> None:
    from .io_utils import atomic_write_bytes

    atomic_write_bytes(path, ser.dumps(to_container(forest, meta)))


def load_forest(path) -> tuple[RandomForest, dict]:
    with open(path, "rb") as fh:
        c = ser.loads(fh.read(), expect_kind=ser.KIND_FOREST)
    return from_container(c), c.meta
