"""Versioned, self-describing text encoding of trained models.

A model is a JSON object::

    {"format": "fogcrn-model", "format_version": 1, "kind": "svm",
     "schema_version": 1,
     "fields": {"b": {"shape": [], "dtype": "float64", "values": [0.25]}, ...}}

Every numeric field records its shape, dtype and flattened values. Floats
are written with Python's shortest round-trip repr, so decoding gives back
bit-identical values.
"""
from __future__ import annotations

import json

import numpy as np

from ..errors import InvalidArgumentError, WireFormatError
from ..sensing import FEATURE_SCHEMA_VERSION
from .classify import ThresholdModel
from .kernels import Kernel, KernelKind
from .regression import RegressionModel
from .svm import SvmModel

FORMAT = "fogcrn-model"
FORMAT_VERSION = 1


def _field(value, dtype="float64") -> dict:
    arr = np.asarray(value, dtype=dtype)
    return {"shape": list(arr.shape), "dtype": dtype, "values": arr.reshape(-1).tolist()}


def _value(fields: dict, name: str):
    try:
        spec = fields[name]
        arr = np.array(spec["values"], dtype=spec["dtype"]).reshape(spec["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        raise WireFormatError(f"bad or missing model field {name!r}") from exc
    return arr if arr.ndim else arr.item()


def dumps_model(model, schema_version: int = FEATURE_SCHEMA_VERSION) -> str:
    if isinstance(model, RegressionModel):
        kind = "regression"
        fields = {"w": _field(model.w), "lambda": _field(model.lambda_),
                  "intercept": _field(model.intercept)}
    elif isinstance(model, SvmModel):
        kind = "svm"
        k = model.kernel
        fields = {
            "alphas": _field(model.alphas), "b": _field(model.b), "C": _field(model.C),
            "support_indices": _field(model.support_indices, "int64"),
            "sv_x": _field(model.sv_x), "sv_y": _field(model.sv_y),
            "kernel.gamma": _field(k.gamma), "kernel.coef0": _field(k.coef0),
            "kernel.degree": _field(k.degree, "int64"),
        }
        extra = {"kernel.kind": k.kind.value}
    elif isinstance(model, ThresholdModel):
        kind = "threshold"
        fields = {"rho": _field(model.rho)}
    else:
        raise InvalidArgumentError(f"cannot serialize {type(model).__name__}")
    doc = {"format": FORMAT, "format_version": FORMAT_VERSION, "kind": kind,
           "schema_version": int(schema_version), "fields": fields}
    if kind == "svm":
        doc["attrs"] = extra
    return json.dumps(doc, sort_keys=True)


def loads_model(text: str):
    """Inverse of :func:`dumps_model`; returns (model, schema_version)."""
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise WireFormatError("model text is not valid JSON") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise WireFormatError("not a fogcrn model document")
    if doc.get("format_version") != FORMAT_VERSION:
        raise WireFormatError(f"unsupported model format version {doc.get('format_version')}")
    f = doc.get("fields", {})
    kind = doc.get("kind")
    if kind == "regression":
        model = RegressionModel(np.atleast_1d(_value(f, "w")), float(_value(f, "lambda")),
                                float(_value(f, "intercept")))
    elif kind == "svm":
        kernel = Kernel(KernelKind(doc["attrs"]["kernel.kind"]), float(_value(f, "kernel.gamma")),
                        float(_value(f, "kernel.coef0")), int(_value(f, "kernel.degree")))
        model = SvmModel(np.atleast_1d(_value(f, "alphas")), float(_value(f, "b")),
                         float(_value(f, "C")), kernel,
                         np.atleast_1d(_value(f, "support_indices")),
                         np.asarray(_value(f, "sv_x"), dtype=float),
                         np.atleast_1d(_value(f, "sv_y")))
    elif kind == "threshold":
        model = ThresholdModel(float(_value(f, "rho")))
    else:
        raise WireFormatError(f"unknown model kind {kind!r}")
    return model, int(doc.get("schema_version", FEATURE_SCHEMA_VERSION))


def save_model(path, model, schema_version: int = FEATURE_SCHEMA_VERSION) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(model, schema_version))
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
