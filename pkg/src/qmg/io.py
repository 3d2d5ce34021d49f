"""CSV and JSON writers. Floats are written with 17 significant digits."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def write_field_csv(path: Path, field) -> Path:
    """Dense ``p,q,w`` dump of a Wigner field, p-major."""
    p = field.p_grid.points
    q = field.q_grid.points
    v = field.values
    rows = ((p[i], q[j], v[i, j]) for i in range(len(p)) for j in range(len(q)))
    return write_csv(path, ("p", "q", "w"), rows)


def write_curve_csv(path: Path, curve) -> Path:
    return write_csv(path, ("ln_c", "F"), zip(curve.ln_c, curve.F))
