"""Versioned JSON serialization of fitted ensembles."""

from __future__ import annotations

import json

from .ensemble import GBMModel, RandomForestModel
from .tree import DecisionTree

FORMAT = "dtnopt-ensemble"
VERSION = 1


def model_to_dict(model, feature_names=None, target=None) -> dict:
    doc = {"format": FORMAT, "version": VERSION, "family": model.kind,
           "target": target, "feature_names": list(feature_names or []),
           "params": model.get_params()}
    if model.kind == "rf":
        doc["trees"] = [t.to_dict() for t in model.trees_]
    else:
        doc["init"] = model.init_
        doc["stages"] = [t.to_dict() for t in model.stages_]
    doc["n_features"] = model.n_features_
    return doc


def model_from_dict(doc: dict):
    if doc.get("format") != FORMAT:
        raise ValueError("not a serialized ensemble")
    if doc.get("version") != VERSION:
        raise ValueError(f"unsupported model file version {doc.get('version')}")
    if doc["family"] == "rf":
        model = RandomForestModel(**doc["params"])
        model.trees_ = [DecisionTree.from_dict(t) for t in doc["trees"]]
    elif doc["family"] == "gbm":
        model = GBMModel(**doc["params"])
        model.init_ = doc["init"]
        model.stages_ = [DecisionTree.from_dict(t) for t in doc["stages"]]
    else:
        raise ValueError(f"unknown family {doc['family']!r}")
    model.n_features_ = doc["n_features"]
    model.feature_names = doc.get("feature_names") or None
    model.target = doc.get("target")
    return model


def save_model(path, model, feature_names=None, target=None):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model, feature_names, target), fh, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
