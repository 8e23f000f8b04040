"""Snapshot io shared by the envelope and lattice evolution modules.

Binary snapshots are npz archives with a json metadata entry; CSV exports
flatten a complex field over its grid coordinates.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def save_fields(path, meta: dict, **arrays) -> None:
    packed = {k: np.asarray(v) for k, v in arrays.items()}
    packed["__meta__"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    np.savez(path, **packed)


def load_fields(path) -> tuple[dict, dict]:
    with np.load(path) as data:
        arrays = {k: data[k] for k in data.files if k != "__meta__"}
        meta = json.loads(bytes(data["__meta__"]).decode()) if "__meta__" in data.files else {}
    return meta, arrays


def field_to_csv(path, x1: np.ndarray, x2: np.ndarray, **fields) -> None:
    """Write columns x1, x2 then <name>_re, <name>_im per field, row-major."""
    names = sorted(fields)
    header = "x1,x2," + ",".join(f"{n}_re,{n}_im" for n in names)
    x1f, x2f = np.ravel(x1), np.ravel(x2)
    cols = [np.ravel(np.asarray(fields[n], dtype=complex)) for n in names]
    lines = [header]
    for i in range(len(x1f)):
        parts = [f"{x1f[i]:.17g}", f"{x2f[i]:.17g}"]
        for c in cols:
            parts.append(f"{c[i].real:.17g}")
            parts.append(f"{c[i].imag:.17g}")
        lines.append(",".join(parts))
    Path(path).write_text("\n".join(lines) + "\n")
