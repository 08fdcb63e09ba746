"""Evaluation, splitting, cross-validated grid search and feature ranking."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence

import numpy as np

from ..errors import (
    InvalidFraction,
    KTooLarge,
    LengthMismatch,
    TooFewRows,
    UnfittedModel,
    ZeroVarianceTarget,
)
from .ensemble import make_model


@dataclass(frozen=True)
class EvalMetrics:
    mse: float
    rmse: float
    r_squared: float


def evaluate(y_true, y_pred) -> EvalMetrics:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise LengthMismatch(f"shapes {y_true.shape} and {y_pred.shape}")
    resid = y_true - y_pred
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0:
        raise ZeroVarianceTarget("R-squared undefined for a constant target")
    mse = ss_res / y_true.size
    return EvalMetrics(mse, math.sqrt(mse), 1.0 - ss_res / ss_tot)


def train_test_split(n_rows: int, test_fraction: float, seed: int = 0):
    """Shuffled row indices split into ``(train, test)``.

    The test part holds ``round(n * test_fraction)`` rows (halves round up).
    """
    if not 0 < test_fraction < 1:
        raise InvalidFraction(f"test_fraction={test_fraction} not in (0, 1)")
    perm = np.random.default_rng(seed).permutation(n_rows)
    n_test = int(math.floor(n_rows * test_fraction + 0.5))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def kfold_indices(n_rows: int, k: int, seed: int = 0) -> List[np.ndarray]:
    """``k`` contiguous blocks of a seeded shuffle; sizes differ by at most one."""
    if k < 2:
        raise ValueError("need at least 2 folds")
    if n_rows < k:
        raise TooFewRows(f"{n_rows} rows cannot fill {k} folds")
    perm = np.random.default_rng(seed).permutation(n_rows)
    sizes = [n_rows // k + (1 if i < n_rows % k else 0) for i in range(k)]
    bounds = np.cumsum([0] + sizes)
    return [perm[bounds[i]:bounds[i + 1]] for i in range(k)]


def expand_grid(grid: Mapping[str, Sequence]) -> List[Dict]:
    """All combinations, last key varying fastest."""
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def grid_search(X, y, family: str, grid: Mapping[str, Sequence], k: int = 5,
                seed: int = 0, base_params=None):
    """Exhaustive search scored by mean validation MSE over ``k`` folds.

    Returns ``(best_params, table)`` where ``table`` lists every combination
    with its mean and standard deviation of fold MSE, in enumeration order.
    Ties keep the earliest combination.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    combos = expand_grid(grid)
    if not combos:
        raise ValueError("empty grid")
    folds = kfold_indices(len(y), k, seed)
    table = []
    best, best_score = None, math.inf
    for combo in combos:
        params = {**(base_params or {}), **combo}
        scores = []
        for i, test in enumerate(folds):
            train = np.concatenate([f for j, f in enumerate(folds) if j != i])
            model = make_model(family, params, seed).fit(X[train], y[train])
            scores.append(float(np.mean((model.predict(X[test]) - y[test]) ** 2)))
        mean, std = float(np.mean(scores)), float(np.std(scores))
        table.append({"params": combo, "mean_mse": mean, "std_mse": std})
        if mean < best_score:
            best, best_score = combo, mean
    return dict(best), table


def feature_importance(model, feature_names: Sequence[str] = None) -> Dict[str, float]:
    """Share of total squared-error reduction credited to each feature.

    Raises :class:`UnfittedModel` if the model has no splits at all (for
    example a constant target), since the shares are then undefined.
    """
    gains = np.asarray(model.feature_gains(), dtype=float)
    total = gains.sum()
    if not total > 0:
        raise UnfittedModel("model has no splits; importances are undefined")
    if feature_names is None:
        feature_names = [f"x{i}" for i in range(len(gains))]
    return {name: float(g / total) for name, g in zip(feature_names, gains)}


def select_top_k(importances: Mapping[str, float], k: int) -> List[str]:
    """The ``k`` heaviest features; ties keep column order."""
    names = list(importances)
    if not 0 < k <= len(names):
        raise KTooLarge(f"k={k} with {len(names)} features")
    order = sorted(range(len(names)), key=lambda i: (-importances[names[i]], i))
    return [names[i] for i in order[:k]]
