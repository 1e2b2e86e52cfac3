"""Versioned JSON documents for fitted detectors."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..exceptions import FlowbenchError
from . import DETECTORS

SCHEMA_VERSION = 1


def _plain(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def model_to_dict(model, scaler=None) -> dict:
    doc = {
        "schema": SCHEMA_VERSION,
        "family": model.family,
        "hyper": _plain(model.hyper_),
        "params": _plain(model.get_params()),
        "state": _plain(model._get_state()),
    }
    if scaler is not None:
        doc["standardization"] = {"mean": scaler.mean_.tolist(), "scale": scaler.scale_.tolist()}
    return doc


def model_from_dict(doc: dict):
    """Rebuild ``(model, standardization or None)`` from :func:`model_to_dict` output."""
    if doc.get("schema") != SCHEMA_VERSION:
        raise FlowbenchError(f"unsupported model schema {doc.get('schema')!r}")
    try:
        cls = DETECTORS[doc["family"]]
    except KeyError:
        raise FlowbenchError(f"unknown detector family {doc.get('family')!r}") from None
    model = cls(**doc["params"])
    model._set_state(doc["state"])
    std = doc.get("standardization")
    if std is not None:
        std = (np.asarray(std["mean"], dtype=float), np.asarray(std["scale"], dtype=float))
    return model, std


def save_model(model, path, scaler=None) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, scaler)))


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))
