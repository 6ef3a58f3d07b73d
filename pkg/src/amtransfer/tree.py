"""Weighted regression trees: exhaustive binary splits on squared error.

Candidate thresholds are midpoints between consecutive distinct feature
values; split ties break toward the lowest (feature index, threshold).
Points with x >= threshold always route to the right child. Defaults
grow the tree until leaves are pure (no depth cap, one sample per leaf).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, N_FEATURES


@dataclass(frozen=True)
class TreeHyperparams:
    max_depth: int | None = None
    min_samples_leaf: int = 1

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be None or >= 0")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


DEFAULT_TREE = TreeHyperparams()

_LEAF = -1
# Slack for the child-impurity-never-exceeds-parent check; covers pure
# float64 cancellation noise.
_IMPURITY_SLACK = 1e-9


class TreeModel:
    """A fitted binary regression tree in flat-array form.

    ``feature[i] == -1`` marks node i as a leaf with prediction
    ``value[i]``; internal nodes carry a feature index, a threshold, and
    child indices. Immutable once fitted; predictions are thread-safe.
    """

    def __init__(self, feature, threshold, left, right, value,
                 hyperparams: TreeHyperparams):
        self.feature = np.asarray(feature, dtype=np.intp)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.intp)
        self.right = np.asarray(right, dtype=np.intp)
        self.value = np.asarray(value, dtype=np.float64)
        self.hyperparams = hyperparams
        for arr in (self.feature, self.threshold, self.left, self.right, self.value):
            arr.setflags(write=False)
        # Routing tables where leaves loop back to themselves behind an
        # always-false comparison, so batch prediction can run a fixed
        # number of unmasked gather steps.
        is_leaf = self.feature == _LEAF
        self_idx = np.arange(self.feature.size, dtype=np.intp)
        self._feat_r = np.where(is_leaf, 0, self.feature)
        self._thr_r = np.where(is_leaf, np.inf, self.threshold)
        self._left_r = np.where(is_leaf, self_idx, self.left)
        self._right_r = np.where(is_leaf, self_idx, self.right)
        self.depth = self._compute_depth()

    def _compute_depth(self) -> int:
        depth = 0
        frontier = [0] if self.feature.size and self.feature[0] != _LEAF else []
        while frontier:
            depth += 1
            frontier = [c
                        for i in frontier
                        for c in (self.left[i], self.right[i])
                        if self.feature[c] != _LEAF]
        return depth

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_leaves(self) -> int:
        return int((self.feature == _LEAF).sum())

    def predict(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (N_FEATURES,):
            raise ValueError(f"expected a {N_FEATURES}-vector, got shape {x.shape}")
        if not np.isfinite(x).all():
            raise ValueError("input vector must be finite")
        return float(self.predict_batch(x[None, :])[0])

    def predict_batch(self, x: np.ndarray) -> np.ndarray:
        """Predict rows of an (n, 4) array by iterative routing."""
        x = np.asarray(x, dtype=np.float64)
        x_flat = np.ascontiguousarray(x).ravel()
        base = np.arange(x.shape[0], dtype=np.intp) * N_FEATURES
        node = np.zeros(x.shape[0], dtype=np.intp)
        for _ in range(self.depth):
            xv = x_flat[base + self._feat_r[node]]
            go_right = xv >= self._thr_r[node]
            node = np.where(go_right, self._right_r[node], self._left_r[node])
        return self.value[node]


def _leaf_value(y, w):
    # exact for pure leaves: the weighted mean of equal values is that
    # value, and computing it as (w*y)/w would cost an ulp
    if y[0] == y.max() == y.min():
        return float(y[0])
    w_sum = w.sum()
    if w_sum > 0.0:
        return float((w * y).sum() / w_sum)
    # all-zero-weight region: fall back to the plain mean
    return float(y.mean())


def _node_sse(y, w):
    # centered two-pass form: the one-pass formula's cancellation noise
    # (~1e-12 at y~1e2) would mask genuinely tiny impurities and stop
    # splitting early
    w_sum = w.sum()
    if w_sum <= 0.0:
        return 0.0
    d = y - (w * y).sum() / w_sum
    return float((w * d * d).sum())


def _best_split(x, y, w, min_leaf):
    """Exhaustive scan over every (feature, midpoint) split, all features at once.

    Returns (feature, threshold, child_sse) or None when no candidate
    satisfies the leaf-size constraint. The flattened argmin runs
    feature-major over ascending thresholds, so ties resolve to the
    lowest (feature index, threshold).
    """
    n = y.shape[0]
    if n < 2 * min_leaf:
        return None
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    ws = w[order]
    ys = y[order]
    wy = ws * ys
    cw = np.cumsum(ws, axis=0)
    cwy = np.cumsum(wy, axis=0)
    cwyy = np.cumsum(wy * ys, axis=0)
    lw = cw[:-1]
    lwy = cwy[:-1]
    lwyy = cwyy[:-1]
    rw = cw[-1] - lw
    rwy = cwy[-1] - lwy
    rwyy = cwyy[-1] - lwyy
    lsse = lwyy - lwy * lwy / np.where(lw > 0.0, lw, 1.0)
    rsse = rwyy - rwy * rwy / np.where(rw > 0.0, rw, 1.0)
    child = np.maximum(lsse, 0.0) + np.maximum(rsse, 0.0)
    # valid: strict value increase at the boundary and both children
    # large enough (row i splits after the first i+1 samples)
    invalid = xs[:-1] >= xs[1:]
    if min_leaf > 1:
        rows = np.arange(1, n)
        bad_rows = (rows < min_leaf) | (n - rows < min_leaf)
        invalid |= bad_rows[:, None]
    child[invalid] = np.inf
    best = child.min()
    if not np.isfinite(best):
        return None
    # Mathematically tied candidates (the same partition reached through
    # different features) differ only by summation-order noise; treat
    # scores within a scale-relative tolerance as tied so the
    # lowest-(feature, threshold) rule decides, not rounding.
    tol = 1e-9 * best + 1e-12 * float(cwyy[-1, 0])
    flat = int(np.argmax((child <= best + tol).T.ravel()))
    feat, pos = divmod(flat, n - 1)
    thr = 0.5 * float(xs[pos, feat] + xs[pos + 1, feat])
    return feat, thr, float(child[pos, feat])


def fit_tree(data: Dataset, weights=None,
             hyperparams: TreeHyperparams = DEFAULT_TREE) -> TreeModel:
    """Grow a tree greedily, minimizing weighted squared error per split.

    Parameters
    ----------
    data : Dataset
        Non-empty training data.
    weights : array-like, optional
        Per-sample nonnegative weights with positive sum; defaults to
        uniform. Scaling all weights by a constant leaves the fitted
        tree unchanged.
    hyperparams : TreeHyperparams
        Depth and leaf-size stopping rules.
    """
    return fit_tree_arrays(data.x, data.y, weights, hyperparams)


def fit_tree_arrays(x: np.ndarray, y: np.ndarray, weights=None,
                    hyperparams: TreeHyperparams = DEFAULT_TREE) -> TreeModel:
    """Array-level fit used by ensemble code that pools raw samples."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    if n == 0:
        raise ValueError("cannot fit a tree on an empty dataset")
    if weights is None:
        w = np.ones(n, dtype=np.float64)
    else:
        w = np.asarray(weights, dtype=np.float64).copy()
        if w.shape != (n,):
            raise ValueError(f"weights must have shape ({n},), got {w.shape}")
        if (w < 0.0).any():
            raise ValueError("weights must be nonnegative")
        if not np.isfinite(w).all():
            raise ValueError("weights must be finite")
        if w.sum() <= 0.0:
            raise ValueError("weights must not all be zero")

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(_LEAF)
        threshold.append(0.0)
        left.append(_LEAF)
        right.append(_LEAF)
        value.append(0.0)
        return len(feature) - 1

    # (node id, sample indices, depth) grown depth-first
    stack = [(new_node(), np.arange(n, dtype=np.intp), 0)]
    max_depth = hyperparams.max_depth
    min_leaf = hyperparams.min_samples_leaf
    while stack:
        node, idx, depth = stack.pop()
        yi, wi = y[idx], w[idx]
        parent_sse = _node_sse(yi, wi)
        stop = (
            idx.size < 2 * min_leaf
            or yi.min() == yi.max()  # pure node, exact test
            or parent_sse <= 0.0
            or (max_depth is not None and depth >= max_depth)
        )
        split = None if stop else _best_split(x[idx], yi, wi, min_leaf)
        if split is None:
            value[node] = _leaf_value(yi, wi)
            continue
        feat, thr, child_sse = split
        if child_sse > parent_sse * (1.0 + _IMPURITY_SLACK) + _IMPURITY_SLACK:
            raise AssertionError(
                f"split impurity {child_sse} exceeds parent impurity {parent_sse}")
        go_right = x[idx, feat] >= thr
        feature[node] = feat
        threshold[node] = thr
        left[node] = new_node()
        right[node] = new_node()
        stack.append((left[node], idx[~go_right], depth + 1))
        stack.append((right[node], idx[go_right], depth + 1))

    return TreeModel(feature, threshold, left, right, value, hyperparams)
