"""JSON and CSV encoding with 17 significant digits for every float."""

from __future__ import annotations

import enum
import io
import json
import math
from dataclasses import fields, is_dataclass

import numpy as np

from .core import CollusionChannel, ContinuousPrior, FiniteSpectrumPrior, PriorKind
from .errors import InvalidPriorError


def format_float(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1)) if indent else ""
    close = " " * (indent * level) if indent else ""
    sep = ",\n" if indent else ", "
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, enum.Enum):
        return _encode(obj.value, indent, level)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        # numeric vectors stay on one line
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, 0, 0) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        if indent:
            return "[\n" + sep.join(items) + "\n" + close + "]"
        return "[" + sep.join(items) + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            pad + json.dumps(str(key), ensure_ascii=False) + ": " + _encode(v, indent, level + 1)
            for key, v in obj.items()
        ]
        if indent:
            return "{\n" + sep.join(items) + "\n" + close + "}"
        return "{" + sep.join(items) + "}"
    if hasattr(obj, "to_dict"):
        return _encode(obj.to_dict(), indent, level)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON text; key order is insertion order."""
    return _encode(obj, indent, 0) + "\n"


def loads(text: str):
    return json.loads(text)


def channel_to_dict(c: CollusionChannel) -> dict:
    return {"k": c.k, "p": [float(x) for x in c.p]}


def channel_from_dict(d: dict) -> CollusionChannel:
    return CollusionChannel(int(d["k"]), np.asarray(d["p"], dtype=float))


def prior_to_dict(prior) -> dict:
    if isinstance(prior, FiniteSpectrumPrior):
        return {"support": prior.support.tolist(), "masses": prior.masses.tolist()}
    if prior.kind is PriorKind.CUSTOM:
        # a density closure cannot be written out
        return {"kind": "custom", "hint": list(prior.hint)}
    return {"kind": prior.kind.value, "theta": float(prior.theta)}


def prior_from_dict(d: dict):
    if "support" in d:
        return FiniteSpectrumPrior(
            np.asarray(d["support"], dtype=float), np.asarray(d["masses"], dtype=float)
        )
    kind = d.get("kind")
    if kind == "arcsine":
        return ContinuousPrior.arcsine()
    if kind == "beta":
        return ContinuousPrior.beta(float(d["theta"]))
    raise InvalidPriorError(f"cannot rebuild a prior of kind {kind!r} from JSON")


def to_plain(obj):
    """Recursively turn dataclasses, channels and priors into JSON-ready values."""
    if isinstance(obj, CollusionChannel):
        return channel_to_dict(obj)
    if isinstance(obj, (FiniteSpectrumPrior, ContinuousPrior)):
        return prior_to_dict(obj)
    if hasattr(obj, "to_dict"):
        return to_plain(obj.to_dict())
    if is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, dict):
        return {k: to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def csv_text(header, rows) -> str:
    """CSV with ``\\n`` line endings; floats at 17 significant digits."""
    buf = io.StringIO()

    def cell(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (float, np.floating)):
            return format_float(v)
        if isinstance(v, enum.Enum):
            return str(v.value)
        return str(v)

    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(cell(v) for v in row) + "\n")
    return buf.getvalue()


__all__ = [
    "format_float",
    "dumps",
    "loads",
    "channel_to_dict",
    "channel_from_dict",
    "prior_to_dict",
    "prior_from_dict",
    "to_plain",
    "csv_text",
]
