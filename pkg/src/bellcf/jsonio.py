"""JSON text with fixed 17-significant-digit floats.

``json.dumps`` renders floats with the shortest round-trip repr, which varies
in width. Here every float is written as ``%.16e`` so outputs diff cleanly and
parse back to the identical double.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction

import numpy as np


def _float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    return "%.16e" % x


def _encode(obj, indent: int | None, level: int) -> str:
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating, Fraction)):
        return _float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = [(json.dumps(str(k)), v) for k, v in obj.items()]
        return _container("{", "}", [f"{k}{': ' if indent else ':'}{_encode(v, indent, level + 1)}"
                                     for k, v in items], indent, level)
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        return _container("[", "]", [_encode(v, indent, level + 1) for v in seq], indent, level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _container(open_, close, parts, indent, level) -> str:
    if not parts:
        return open_ + close
    # short containers stay on one line
    if indent is None or (sum(map(len, parts)) <= 72 and not any("\n" in p for p in parts)):
        return open_ + ("," if indent is None else ", ").join(parts) + close
    pad = "\n" + " " * (indent * (level + 1))
    return open_ + pad + ("," + pad).join(parts) + "\n" + " " * (indent * level) + close


def dumps(obj, indent: int | None = None) -> str:
    return _encode(obj, indent, 0)


def loads(text: str):
    return json.loads(text)
