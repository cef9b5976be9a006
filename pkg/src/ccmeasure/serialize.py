"""JSON/CSV emission with fixed float formatting, and policy (de)serialization.

Floats are written with 17 significant digits so every value round-trips
exactly; non-finite floats become ``null``.  Keys are sorted, so output is a
pure function of the data.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import DomainError
from .problem import DiscretePolicy, GmmPolicy, PointPolicy


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _emit(obj, indent, level, out):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or obj is True or obj is False:
        out.append(json.dumps(obj))
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(fmt_float(obj) if math.isfinite(obj) else "null")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), indent, level, out)
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = sorted(obj.items())
        for k, (key, val) in enumerate(items):
            out.append(pad + json.dumps(str(key)) + ": ")
            _emit(val, indent, level + 1, out)
            out.append(",\n" if k < len(items) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        # flat numeric lists stay on one line
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            parts = []
            for v in obj:
                sub = []
                _emit(v, indent, level, sub)
                parts.append("".join(sub))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for k, val in enumerate(obj):
            out.append(pad)
            _emit(val, indent, level + 1, out)
            out.append(",\n" if k < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    out = []
    _emit(obj, indent, 0, out)
    return "".join(out) + "\n"


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(obj))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# -- policies ----------------------------------------------------------------


def policy_to_dict(policy) -> dict:
    if isinstance(policy, PointPolicy):
        return {"kind": "point", "x": policy.x.tolist()}
    if isinstance(policy, DiscretePolicy):
        return {
            "kind": "discrete",
            "support": [
                {"index": i, "x": p.tolist(), "weight": float(w)}
                for i, p, w in zip(policy.indices, policy.points, policy.weights)
            ],
        }
    if isinstance(policy, GmmPolicy):
        return {"kind": "gmm", **policy.params.to_dict()}
    raise DomainError(f"unsupported policy type {type(policy).__name__}")


def policy_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "point":
        return PointPolicy(np.asarray(d["x"], dtype=float))
    if kind == "discrete":
        sup = d["support"]
        return DiscretePolicy(
            tuple(int(s["index"]) for s in sup),
            np.array([s["weight"] for s in sup], dtype=float),
            np.array([s["x"] for s in sup], dtype=float),
        )
    if kind == "gmm":
        from .gmm import GmmParams

        return GmmPolicy(GmmParams.from_dict(d))
    raise DomainError(f"unknown policy kind {kind!r}")


def lp_solution_to_dict(sol, points) -> dict:
    """``{status, objective, support: [{index, x, weight}], alpha, tight}``."""
    out = {"status": sol.status, "objective": sol.objective, "alpha": sol.alpha, "tight": bool(sol.active_constraint)}
    if sol.measure is not None:
        out["support"] = [
            {"index": i, "x": np.asarray(points[i]).tolist(), "weight": w}
            for i, w in zip(sol.measure.indices, sol.measure.weights)
        ]
    else:
        out["support"] = []
    return out
