"""Random forest and gradient boosting built on :class:`DecisionTree`."""

from __future__ import annotations

import numpy as np

from ..errors import EmptyTrainingSet, InvalidSubsample, UnfittedModel
from .tree import DecisionTree


def _tree_seeds(seed, n):
    return np.random.SeedSequence(seed).spawn(n)


class RandomForestModel:
    """Bagged regression trees; the prediction is the plain mean over trees.

    Each tree gets its own seed stream spawned from ``random_state``, so a
    fit is reproducible regardless of how trees are scheduled.
    """

    kind = "rf"

    def __init__(self, n_estimators=100, max_features="auto", max_depth=None,
                 min_samples_split=2, min_samples_leaf=1, bootstrap=True,
                 random_state=0):
        self.n_estimators = n_estimators
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.bootstrap = bootstrap
        self.random_state = random_state
        self.trees_ = []

    def get_params(self):
        return dict(n_estimators=self.n_estimators, max_features=self.max_features,
                    max_depth=self.max_depth, min_samples_split=self.min_samples_split,
                    min_samples_leaf=self.min_samples_leaf, bootstrap=self.bootstrap,
                    random_state=self.random_state)

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise EmptyTrainingSet("no training rows")
        n = X.shape[0]
        self.n_features_ = X.shape[1]
        self.trees_ = []
        for ss in _tree_seeds(self.random_state, self.n_estimators):
            rng = np.random.default_rng(ss)
            rows = rng.integers(n, size=n) if self.bootstrap else np.arange(n)
            tree = DecisionTree(self.max_depth, self.min_samples_split,
                                self.min_samples_leaf, self.max_features)
            self.trees_.append(tree.fit(X[rows], y[rows], rng))
        return self

    def _check(self):
        if not self.trees_:
            raise UnfittedModel("random forest is not fitted")

    def tree_predictions(self, X) -> np.ndarray:
        """Array of shape (n_trees, n_rows)."""
        self._check()
        return np.stack([t.predict(X) for t in self.trees_])

    def predict(self, X) -> np.ndarray:
        self._check()
        total = np.zeros(np.atleast_2d(X).shape[0])
        for tree in self.trees_:
            total += tree.predict(X)
        return total / len(self.trees_)

    def feature_gains(self) -> np.ndarray:
        self._check()
        return sum(t.feature_gains() for t in self.trees_)


class GBMModel:
    """Gradient boosting for squared loss.

    Starts from the training mean and adds ``learning_rate`` times a
    regression tree fitted to the current residuals at every stage. With
    squared loss the optimal step inside each leaf is the mean residual
    there, which is exactly what the tree's leaf value already is.
    """

    kind = "gbm"

    def __init__(self, n_estimators=100, learning_rate=0.1, max_depth=3,
                 subsample=1.0, min_samples_split=2, min_samples_leaf=1,
                 max_features="auto", random_state=0):
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.subsample = subsample
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.random_state = random_state
        self.init_ = None
        self.stages_ = []

    def get_params(self):
        return dict(n_estimators=self.n_estimators, learning_rate=self.learning_rate,
                    max_depth=self.max_depth, subsample=self.subsample,
                    min_samples_split=self.min_samples_split,
                    min_samples_leaf=self.min_samples_leaf,
                    max_features=self.max_features, random_state=self.random_state)

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise EmptyTrainingSet("no training rows")
        if not 0 < self.subsample <= 1:
            raise InvalidSubsample(f"subsample={self.subsample} not in (0, 1]")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        n = X.shape[0]
        self.n_features_ = X.shape[1]
        self.init_ = float(y.mean())
        F = np.full(n, self.init_)
        n_sub = max(1, int(round(self.subsample * n)))
        self.stages_ = []
        self.train_mse_ = [float(np.mean((y - F) ** 2))]
        for ss in _tree_seeds(self.random_state, self.n_estimators):
            rng = np.random.default_rng(ss)
            residual = y - F
            rows = np.sort(rng.choice(n, size=n_sub, replace=False)) if n_sub < n \
                else np.arange(n)
            tree = DecisionTree(self.max_depth, self.min_samples_split,
                                self.min_samples_leaf, self.max_features)
            tree.fit(X[rows], residual[rows], rng)
            self.stages_.append(tree)
            F = F + self.learning_rate * tree.predict(X)
            self.train_mse_.append(float(np.mean((y - F) ** 2)))
        return self

    def _check(self):
        if self.init_ is None:
            raise UnfittedModel("GBM is not fitted")

    def staged_predict(self, X):
        self._check()
        X = np.atleast_2d(np.asarray(X, dtype=float))
        F = np.full(X.shape[0], self.init_)
        yield F.copy()
        for tree in self.stages_:
            F = F + self.learning_rate * tree.predict(X)
            yield F.copy()

    def predict(self, X) -> np.ndarray:
        self._check()
        X = np.atleast_2d(np.asarray(X, dtype=float))
        F = np.full(X.shape[0], self.init_)
        for tree in self.stages_:
            F = F + self.learning_rate * tree.predict(X)
        return F

    def feature_gains(self) -> np.ndarray:
        self._check()
        out = np.zeros(self.n_features_)
        for t in self.stages_:
            out += t.feature_gains()
        return out


# Hyperparameter presets used in the reference study, keyed by family.
REFERENCE_PROFILES = {
    "rf": dict(n_estimators=50, max_features="log2", max_depth=12,
               min_samples_split=20, min_samples_leaf=20, bootstrap=True),
    "gbm": dict(n_estimators=100, learning_rate=0.04, max_depth=2, subsample=0.1,
                min_samples_split=10, min_samples_leaf=6, max_features="auto"),
}

# Best combinations the reference study reports after grid search.
REFERENCE_TUNED = {
    "rf": dict(bootstrap=True, max_depth=10, max_features="log2", min_samples_leaf=15,
               min_samples_split=10, n_estimators=15),
    "gbm": dict(learning_rate=0.04, max_depth=2, max_features="auto", min_samples_leaf=5,
                min_samples_split=8, n_estimators=100, subsample=0.12),
}

MODEL_CLASSES = {"rf": RandomForestModel, "gbm": GBMModel}


def make_model(family: str, params=None, seed=0):
    try:
        cls = MODEL_CLASSES[family]
    except KeyError:
        raise ValueError(f"unknown model family {family!r}") from None
    return cls(**{**(params or {}), "random_state": seed})


def fit_rf(X, y, params=None, seed=0) -> RandomForestModel:
    return make_model("rf", params, seed).fit(X, y)


def fit_gbm(X, y, params=None, seed=0) -> GBMModel:
    return make_model("gbm", params, seed).fit(X, y)


def predict_rf(model: RandomForestModel, X):
    return model.predict(X)
