"""JSON export and import of trained models for reproducibility audits."""

import json
from pathlib import Path

import numpy as np

from mdrobustness.classifiers.forest import DecisionTree, ForestModel
from mdrobustness.classifiers.svm import Kernel, SvmModel

MODEL_FORMAT_VERSION = 1

_TREE_ARRAYS = {
    "feature": np.int64,
    "threshold": np.float64,
    "left": np.int64,
    "right": np.int64,
    "counts": np.int64,
    "depth": np.int64,
}


def _svm_to_dict(model: SvmModel) -> dict:
    return {
        "kernel": model.kernel.to_dict(),
        "c": model.c,
        "support_vectors": model.support_vectors.tolist(),
        "dual_coefs": model.dual_coefs.tolist(),
        "intercepts": model.intercepts.tolist(),
        "class_ids": model.class_ids.tolist(),
        "pairs": model.pairs.tolist(),
        "seed": model.seed,
    }


def _svm_from_dict(data: dict) -> SvmModel:
    n_pairs = len(data["pairs"])
    return SvmModel(
        kernel=Kernel.from_dict(data["kernel"]),
        c=float(data["c"]),
        support_vectors=np.asarray(data["support_vectors"], dtype=np.float64),
        dual_coefs=np.asarray(data["dual_coefs"], dtype=np.float64).reshape(n_pairs, -1),
        intercepts=np.asarray(data["intercepts"], dtype=np.float64),
        class_ids=np.asarray(data["class_ids"], dtype=np.int64),
        pairs=np.asarray(data["pairs"], dtype=np.int64).reshape(-1, 2),
        seed=int(data["seed"]),
    )


def _forest_to_dict(model: ForestModel) -> dict:
    return {
        "class_ids": model.class_ids.tolist(),
        "n_estimators": model.n_estimators,
        "max_depth": model.max_depth,
        "seed": model.seed,
        "n_features": model.n_features,
        "trees": [
            {name: getattr(tree, name).tolist() for name in _TREE_ARRAYS} for tree in model.trees
        ],
        "bootstrap_indices": [sample.tolist() for sample in model.bootstrap_indices],
    }


def _forest_from_dict(data: dict) -> ForestModel:
    n_classes = len(data["class_ids"])
    trees = []
    for tree in data["trees"]:
        arrays = {name: np.asarray(tree[name], dtype=dt) for name, dt in _TREE_ARRAYS.items()}
        arrays["counts"] = arrays["counts"].reshape(-1, n_classes)
        trees.append(DecisionTree(**arrays))
    return ForestModel(
        trees=trees,
        class_ids=np.asarray(data["class_ids"], dtype=np.int64),
        n_estimators=int(data["n_estimators"]),
        max_depth=int(data["max_depth"]),
        seed=int(data["seed"]),
        n_features=int(data["n_features"]),
        bootstrap_indices=[np.asarray(s, dtype=np.int64) for s in data["bootstrap_indices"]],
    )


_CODECS = {
    "svm": (SvmModel, _svm_to_dict, _svm_from_dict),
    "random_forest": (ForestModel, _forest_to_dict, _forest_from_dict),
}


def model_to_dict(model) -> dict:
    for model_type, (cls, encode, _) in _CODECS.items():
        if isinstance(model, cls):
            return {
                "model_type": model_type,
                "format_version": MODEL_FORMAT_VERSION,
                "model": encode(model),
            }
    raise TypeError(f"cannot export model of type {type(model).__name__}")


def model_from_dict(data: dict):
    model_type = data.get("model_type")
    if model_type not in _CODECS:
        raise ValueError(f"Model type '{model_type}' is not supported.")
    if data.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {data.get('format_version')}")
    return _CODECS[model_type][2](data["model"])


def save_model(model, path) -> Path:
    path = Path(path)
    with open(path, "w") as f:
        json.dump(model_to_dict(model), f)
    return path


def load_model(path):
    with open(path, "r") as f:
        return model_from_dict(json.load(f))
