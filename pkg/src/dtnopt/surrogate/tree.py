"""CART regression tree grown by greedy variance reduction."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ..errors import EmptyTrainingSet, UnfittedModel

LEAF = -1


def n_candidate_features(max_features, n_features: int) -> int:
    """Number of features examined at each split.

    ``"auto"``/``None`` means all of them, ``"sqrt"`` is floor(sqrt(d)),
    ``"log2"`` is max(1, floor(log2(d))); an int is used as is and a float
    in (0, 1] is a fraction of d.
    """
    d = n_features
    if max_features in (None, "auto"):
        return d
    if max_features == "sqrt":
        return max(1, int(math.isqrt(d)))
    if max_features == "log2":
        return max(1, int(math.floor(math.log2(d))))
    if isinstance(max_features, (bool, np.bool_)):
        raise ValueError(f"invalid max_features {max_features!r}")
    if isinstance(max_features, (int, np.integer)):
        if not 1 <= max_features <= d:
            raise ValueError(f"max_features={max_features} outside [1, {d}]")
        return int(max_features)
    if isinstance(max_features, float) and 0 < max_features <= 1:
        return max(1, int(max_features * d))
    raise ValueError(f"invalid max_features {max_features!r}")


def _best_split(x, y, min_leaf):
    """Best midpoint threshold on one feature column.

    Returns ``(sse_reduction, threshold)`` or None when no admissible split
    exists.
    """
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = len(ys)
    csum = np.cumsum(ys)
    csq = np.cumsum(ys * ys)
    total, total_sq = csum[-1], csq[-1]
    # split after position i (left = 0..i)
    i = np.arange(min_leaf - 1, n - min_leaf)
    if i.size == 0:
        return None
    i = i[xs[i] < xs[i + 1]]
    if i.size == 0:
        return None
    nl = i + 1.0
    nr = n - nl
    sl, sr = csum[i], total - csum[i]
    sse_left = csq[i] - sl * sl / nl
    sse_right = (total_sq - csq[i]) - sr * sr / nr
    parent = total_sq - total * total / n
    gain = parent - (sse_left + sse_right)
    k = int(np.argmax(gain))
    return float(gain[k]), float((xs[i[k]] + xs[i[k] + 1]) / 2.0)


@dataclass
class TreeParams:
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: Union[str, int, float, None] = "auto"


class DecisionTree:
    """Regression tree stored as flat node arrays.

    ``feature[k] == -1`` marks a leaf; otherwise rows with
    ``x[feature] <= threshold`` go to ``left[k]``. ``value`` holds the
    training mean of the rows reaching each node and ``gain`` the squared
    error removed by each split.
    """

    def __init__(self, max_depth=None, min_samples_split=2, min_samples_leaf=1,
                 max_features="auto"):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.n_features = None

    def get_params(self):
        return dict(max_depth=self.max_depth, min_samples_split=self.min_samples_split,
                    min_samples_leaf=self.min_samples_leaf, max_features=self.max_features)

    def fit(self, X, y, rng=None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise EmptyTrainingSet("no training rows")
        if not np.all(np.isfinite(y)):
            raise ValueError("targets must be finite")
        if rng is None:
            rng = np.random.default_rng(0)
        n, d = X.shape
        self.n_features = d
        k_feat = n_candidate_features(self.max_features, d)
        min_split = max(2, self.min_samples_split)
        min_leaf = max(1, self.min_samples_leaf)

        feature, threshold, left, right, value, n_node, gain = [], [], [], [], [], [], []

        def new_node(rows):
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(LEAF)
            right.append(LEAF)
            value.append(float(y[rows].mean()))
            n_node.append(len(rows))
            gain.append(0.0)
            return len(feature) - 1

        root = new_node(np.arange(n))
        stack = [(root, np.arange(n), 0)]
        while stack:
            node, rows, depth = stack.pop()
            yr = y[rows]
            if (self.max_depth is not None and depth >= self.max_depth) \
                    or len(rows) < min_split or len(rows) < 2 * min_leaf \
                    or np.ptp(yr) == 0:
                continue
            if k_feat < d:
                cands = np.sort(rng.choice(d, size=k_feat, replace=False))
            else:
                cands = range(d)
            best = None
            for f in cands:
                res = _best_split(X[rows, f], yr, min_leaf)
                if res is not None and res[0] > 0 and (best is None or res[0] > best[0]):
                    best = (res[0], int(f), res[1])
            if best is None:
                continue
            g, f, thr = best
            mask = X[rows, f] <= thr
            lrows, rrows = rows[mask], rows[~mask]
            feature[node], threshold[node], gain[node] = f, thr, g
            left[node] = new_node(lrows)
            right[node] = new_node(rrows)
            # push right first so the left subtree is numbered first
            stack.append((right[node], rrows, depth + 1))
            stack.append((left[node], lrows, depth + 1))

        self.feature_ = np.array(feature, dtype=np.intp)
        self.threshold_ = np.array(threshold, dtype=float)
        self.left_ = np.array(left, dtype=np.intp)
        self.right_ = np.array(right, dtype=np.intp)
        self.value_ = np.array(value, dtype=float)
        self.n_node_samples_ = np.array(n_node, dtype=np.intp)
        self.gain_ = np.array(gain, dtype=float)
        return self

    @property
    def is_fitted(self):
        return hasattr(self, "feature_")

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row."""
        if not self.is_fitted:
            raise UnfittedModel("tree is not fitted")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        idx = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        active = self.feature_[idx] != LEAF
        while active.any():
            r = rows[active]
            nodes = idx[r]
            f = self.feature_[nodes]
            go_left = X[r, f] <= self.threshold_[nodes]
            idx[r] = np.where(go_left, self.left_[nodes], self.right_[nodes])
            active = self.feature_[idx] != LEAF
        return idx

    def predict(self, X) -> np.ndarray:
        leaves = self.apply(X)
        return self.value_[leaves]

    @property
    def n_leaves(self):
        return int(np.sum(self.feature_ == LEAF))

    @property
    def depth(self):
        depth = np.zeros(len(self.feature_), dtype=int)
        for k in range(len(self.feature_)):
            if self.feature_[k] != LEAF:
                depth[self.left_[k]] = depth[k] + 1
                depth[self.right_[k]] = depth[k] + 1
        return int(depth.max())

    def feature_gains(self) -> np.ndarray:
        """Total squared-error reduction credited to each feature."""
        out = np.zeros(self.n_features)
        split = self.feature_ != LEAF
        np.add.at(out, self.feature_[split], self.gain_[split])
        return out

    def to_dict(self):
        return {
            "params": self.get_params(),
            "n_features": self.n_features,
            "feature": self.feature_.tolist(),
            "threshold": self.threshold_.tolist(),
            "left": self.left_.tolist(),
            "right": self.right_.tolist(),
            "value": self.value_.tolist(),
            "n_node_samples": self.n_node_samples_.tolist(),
            "gain": self.gain_.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        tree = cls(**d["params"])
        tree.n_features = d["n_features"]
        tree.feature_ = np.array(d["feature"], dtype=np.intp)
        tree.threshold_ = np.array(d["threshold"], dtype=float)
        tree.left_ = np.array(d["left"], dtype=np.intp)
        tree.right_ = np.array(d["right"], dtype=np.intp)
        tree.value_ = np.array(d["value"], dtype=float)
        tree.n_node_samples_ = np.array(d["n_node_samples"], dtype=np.intp)
        tree.gain_ = np.array(d["gain"], dtype=float)
        return tree


def fit_tree(rows, targets, params: Optional[TreeParams] = None, seed=0) -> DecisionTree:
    params = params or TreeParams()
    return DecisionTree(**vars(params)).fit(rows, targets, np.random.default_rng(seed))
