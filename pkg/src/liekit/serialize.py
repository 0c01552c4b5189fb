"""JSON encodings shared by the library and the CLI."""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from liekit.config import InvalidInputError


def matrix_to_json(A) -> dict[str, Any]:
    """Encode a square matrix as ``{"dim", "field", "entries"}``.

    Complex scalars become ``[re, im]`` pairs.  Floats are emitted through
    ``float`` so ``json`` writes the shortest round-tripping repr.
    """
    M = np.asarray(A)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {M.shape}")
    if np.iscomplexobj(M):
        entries = [[[float(z.real), float(z.imag)] for z in row] for row in M]
        field = "complex"
    else:
        entries = [[float(x) for x in row] for row in M]
        field = "real"
    return {"dim": int(M.shape[0]), "field": field, "entries": entries}


def matrix_from_json(obj: Any) -> np.ndarray:
    if not isinstance(obj, dict) or not {"dim", "field", "entries"} <= obj.keys():
        raise InvalidInputError("matrix JSON needs keys dim, field, entries")
    d = obj["dim"]
    field = obj["field"]
    rows = obj["entries"]
    if not isinstance(d, int) or d < 1 or len(rows) != d or any(len(r) != d for r in rows):
        raise InvalidInputError(f"entries must be a {d}x{d} array")
    try:
        if field == "real":
            M = np.array(rows, dtype=float)
        elif field == "complex":
            M = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)
        else:
            raise InvalidInputError(f"unknown field {field!r}")
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"bad matrix entries: {exc}") from exc
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("matrix entries must be finite")
    return M


def vector_to_json(v) -> list:
    v = np.asarray(v)
    if np.iscomplexobj(v):
        return [[float(z.real), float(z.imag)] for z in v]
    return [float(x) for x in v]


def vector_from_json(obj: Any) -> np.ndarray:
    if not isinstance(obj, list) or not obj:
        raise InvalidInputError("vector JSON must be a non-empty list")
    try:
        if all(isinstance(x, list) for x in obj):
            return np.array([complex(re, im) for re, im in obj])
        return np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"bad vector entries: {exc}") from exc


def dumps(obj: Any) -> str:
    """Deterministic JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"
