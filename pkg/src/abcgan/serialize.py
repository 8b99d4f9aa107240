"""Versioned plain-text (JSON) persistence for fitted models.

Format: a single JSON object with `format_version` and `type` keys; numeric
arrays are nested lists of floats. The layout is documented in the README.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import neuralcore as nc
from .gan import GanModel, SkipState, TrainingHistory
from .priors import GBTConfig, LinearFit, PriorModel, RegressionTree, TreeEnsemble

FORMAT_VERSION = 1


def _network_to_dict(net: nc.Network) -> dict:
    return {
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation,
            }
            for layer in net.layers
        ]
    }


def _network_from_dict(doc: dict) -> nc.Network:
    return nc.Network(
        [
            nc.DenseLayer(
                np.asarray(l["weights"]), np.asarray(l["bias"]), l["activation"]
            )
            for l in doc["layers"]
        ]
    )


def _tree_to_dict(tree: RegressionTree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "value": tree.value.tolist(),
        "max_depth": tree.max_depth,
    }


def _tree_from_dict(doc: dict) -> RegressionTree:
    return RegressionTree(
        feature=np.asarray(doc["feature"], dtype=np.int64),
        threshold=np.asarray(doc["threshold"], dtype=np.float64),
        left=np.asarray(doc["left"], dtype=np.int64),
        right=np.asarray(doc["right"], dtype=np.int64),
        value=np.asarray(doc["value"], dtype=np.float64),
        max_depth=doc["max_depth"],
    )


def prior_to_dict(model: PriorModel) -> dict:
    doc: dict = {"format_version": FORMAT_VERSION, "type": "prior", "kind": model.kind}
    if model.kind == "linear":
        assert model.linear is not None
        doc["beta"] = model.linear.beta.tolist()
    else:
        assert model.trees is not None
        doc["base"] = model.trees.base
        doc["shrinkage"] = model.trees.shrinkage
        doc["trees"] = [_tree_to_dict(t) for t in model.trees.trees]
    return doc


def prior_from_dict(doc: dict) -> PriorModel:
    _check(doc, "prior")
    if doc["kind"] == "linear":
        return PriorModel(kind="linear", linear=LinearFit(np.asarray(doc["beta"])))
    ensemble = TreeEnsemble(
        base=doc["base"],
        trees=[_tree_from_dict(t) for t in doc["trees"]],
        shrinkage=doc["shrinkage"],
    )
    return PriorModel(kind="gbt", trees=ensemble)


def gan_to_dict(model: GanModel) -> dict:
    doc: dict = {
        "format_version": FORMAT_VERSION,
        "type": "gan",
        "variant": model.variant,
        "generator": _network_to_dict(model.generator),
        "discriminator": _network_to_dict(model.discriminator),
        "history": {
            "d_loss": model.history.d_loss,
            "g_loss": model.history.g_loss,
            "w_gan": [w if np.isfinite(w) else None for w in model.history.w_gan],
        },
    }
    if model.skip is not None:
        doc["skip_theta"] = float(model.skip.theta[0])
    return doc


def gan_from_dict(doc: dict) -> GanModel:
    _check(doc, "gan")
    skip = None
    if "skip_theta" in doc:
        skip = SkipState(theta=np.array([doc["skip_theta"]], dtype=np.float64))
    history = TrainingHistory(
        d_loss=list(doc["history"]["d_loss"]),
        g_loss=list(doc["history"]["g_loss"]),
        w_gan=[w if w is not None else float("nan") for w in doc["history"]["w_gan"]],
    )
    return GanModel(
        variant=doc["variant"],
        generator=_network_from_dict(doc["generator"]),
        discriminator=_network_from_dict(doc["discriminator"]),
        skip=skip,
        history=history,
    )


def _check(doc: dict, expected_type: str) -> None:
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {doc.get('format_version')!r}")
    if doc.get("type") != expected_type:
        raise ValueError(f"expected a {expected_type!r} document, got {doc.get('type')!r}")


def save_model(model: PriorModel | GanModel, path: str | Path) -> None:
    doc = prior_to_dict(model) if isinstance(model, PriorModel) else gan_to_dict(model)
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_model(path: str | Path) -> PriorModel | GanModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("type") == "prior":
        return prior_from_dict(doc)
    return gan_from_dict(doc)
