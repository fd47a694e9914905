"""Bit-exact text serialization for named parameter sets.

Format (one record per parameter, order preserved)::

    param <name> <dim0>[x<dim1>...]
    <v0> <v1> ... <vN-1>

Values are written with ``repr``, which for float64 is the shortest string
that round-trips exactly, so save/load is bit-identical.  A scalar is
written with an empty dimension list (``param g -``).
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

__all__ = ["save_params", "load_params", "CheckpointError"]

_MAGIC = "hybridcast-params v1"


class CheckpointError(ValueError):
    """Malformed checkpoint file."""


def _shape_token(shape: tuple[int, ...]) -> str:
    return "x".join(str(d) for d in shape) if shape else "-"


def _parse_shape(token: str) -> tuple[int, ...]:
    if token == "-":
        return ()
    try:
        return tuple(int(d) for d in token.split("x"))
    except ValueError as exc:
        raise CheckpointError(f"bad shape token {token!r}") from exc


def save_params(path, params: Mapping[str, np.ndarray]) -> None:
    """Write an ordered name -> array mapping to ``path``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_MAGIC + "\n")
        for name, values in params.items():
            if " " in name or "\n" in name:
                raise CheckpointError(f"parameter name {name!r} contains whitespace")
            arr = np.asarray(values, dtype=np.float64)
            fh.write(f"param {name} {_shape_token(arr.shape)}\n")
            fh.write(" ".join(repr(float(v)) for v in arr.ravel()) + "\n")


def load_params(path) -> dict[str, np.ndarray]:
    """Read a checkpoint written by :func:`save_params` (order preserved)."""
    out: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != _MAGIC:
            raise CheckpointError(f"not a parameter checkpoint: header {header!r}")
        while True:
            line = fh.readline()
            if not line:
                break
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split(" ")
            if len(fields) != 3 or fields[0] != "param":
                raise CheckpointError(f"bad record line {line!r}")
            _, name, shape_token = fields
            shape = _parse_shape(shape_token)
            values_line = fh.readline()
            if not values_line:
                raise CheckpointError(f"missing values for parameter {name!r}")
            flat = np.array(
                [float(tok) for tok in values_line.split()], dtype=np.float64
            )
            expected = int(np.prod(shape)) if shape else 1
            if flat.size != expected:
                raise CheckpointError(
                    f"parameter {name!r}: expected {expected} values, got {flat.size}"
                )
            out[name] = flat.reshape(shape)
    return out
