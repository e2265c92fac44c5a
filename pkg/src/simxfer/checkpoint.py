"""Named-tensor checkpoint files.

Textual container with a format-version header.  Values are written as
C99 hex float literals, so a save/load cycle is bitwise exact:

    simxfer-checkpoint 1
    <name> <d1,d2,...>
    <hex values, space separated, row-major>
    ...
"""

from __future__ import annotations

import numpy as np

from .errors import DataError

FORMAT_HEADER = "simxfer-checkpoint 1"


def save_checkpoint(path, tensors: dict[str, np.ndarray]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        out.write(FORMAT_HEADER + "\n")
        for name in sorted(tensors):
            arr = np.asarray(tensors[name], dtype=np.float64)
            shape = ",".join(str(d) for d in arr.shape) or "scalar"
            out.write(f"{name} {shape}\n")
            out.write(" ".join(v.hex() for v in arr.reshape(-1).tolist()) + "\n")


def load_checkpoint(path) -> dict[str, np.ndarray]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot open checkpoint {path}: {exc}") from exc
    if not lines or lines[0] != FORMAT_HEADER:
        raise DataError(f"{path}: not a checkpoint file (missing '{FORMAT_HEADER}' header)")
    tensors: dict[str, np.ndarray] = {}
    i = 1
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        try:
            name, shape_text = lines[i].rsplit(" ", 1)
            shape = () if shape_text == "scalar" else tuple(int(d) for d in shape_text.split(","))
            values = np.array([float.fromhex(v) for v in lines[i + 1].split()], dtype=np.float64)
            tensors[name] = values.reshape(shape)
        except (ValueError, IndexError) as exc:
            raise DataError(f"{path}: malformed checkpoint entry at line {i + 1}") from exc
        i += 2
    return tensors
