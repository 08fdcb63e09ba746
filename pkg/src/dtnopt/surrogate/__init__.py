"""Tree-ensemble surrogates for simulator outcomes."""

from .ensemble import (
    GBMModel,
    REFERENCE_PROFILES,
    REFERENCE_TUNED,
    RandomForestModel,
    fit_gbm,
    fit_rf,
    make_model,
    predict_rf,
)
from .persist import load_model, save_model
from .selection import (
    EvalMetrics,
    evaluate,
    expand_grid,
    feature_importance,
    grid_search,
    kfold_indices,
    select_top_k,
    train_test_split,
)
from .tree import DecisionTree, TreeParams, fit_tree, n_candidate_features

__all__ = [
    "DecisionTree", "TreeParams", "fit_tree", "n_candidate_features",
    "RandomForestModel", "GBMModel", "fit_rf", "fit_gbm", "predict_rf", "make_model",
    "REFERENCE_PROFILES", "REFERENCE_TUNED", "EvalMetrics", "evaluate", "train_test_split",
    "kfold_indices", "expand_grid", "grid_search", "feature_importance", "select_top_k",
    "save_model", "load_model",
]
