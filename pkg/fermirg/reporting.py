"""Deterministic report emission.

Reports are canonical JSON: sorted keys, floats with 17 significant digits,
"inf" / "nan" tokens and complex numbers as {"re", "im"}. Wall time goes to a
separate timing file so the report bytes only depend on config and seed.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

logger = logging.getLogger(__name__)

FLOAT_FORMAT = ".17g"


@dataclass(frozen=True)
class RunManifest:
    digest: str
    mode: str
    seed: int
    lattice: dict
    version: str = __version__
    quadrature: dict = field(default_factory=dict)

    def to_record(self):
        return {
            "digest": self.digest,
            "mode": self.mode,
            "seed": self.seed,
            "lattice": self.lattice,
            "version": self.version,
            "quadrature": self.quadrature,
        }


def _format_float(x):
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    text = format(x, FLOAT_FORMAT)
    if text.lstrip("-").isdigit():
        text += ".0"
    return text


def normalize(obj):
    """Plain JSON-ready structure; objects with ``to_record`` are expanded."""
    if hasattr(obj, "to_record"):
        return normalize(obj.to_record())
    if isinstance(obj, dict):
        return {str(k): normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [normalize(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"im": float(obj.imag), "re": float(obj.real)}
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    close = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(obj[k], indent, level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + close + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + close + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _format_float(obj)
    return json.dumps(obj, ensure_ascii=False)


def dumps(report, indent=2):
    return _encode(normalize(report), indent, 0) + "\n"


def write_json(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(report), encoding="utf-8")
    logger.info("✅ Wrote %s", path)
    return path


def save_csv(rows, path):
    """Flat rows only: list or dict valued fields are left out of the table."""
    if not rows:
        return None
    rows = [normalize(r) for r in rows]
    keys = sorted({k for rec in rows for k in rec if not isinstance(rec[k], (list, dict))})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=keys, lineterminator="\n")
        writer.writeheader()
        for rec in rows:
            writer.writerow(
                {k: _format_float(v).strip('"') if isinstance(v, float) else v for k, v in rec.items() if k in keys}
            )
    logger.info("✅ Wrote %s", path)
    return path


def emit(report, out_dir, name, fmt="json", tables=None):
    """Write ``<name>.json`` and, for csv format, one ``<name>_<table>.csv`` per flat table."""
    out_dir = Path(out_dir)
    written = [write_json(report, out_dir / f"{name}.json")]
    if fmt == "csv":
        for table, rows in sorted((tables or {}).items()):
            path = save_csv(rows, out_dir / f"{name}_{table}.csv")
            if path is not None:
                written.append(path)
    return written


def write_timing(out_dir, name, seconds):
    return write_json({"mode": name, "wall_seconds": seconds}, Path(out_dir) / f"{name}_timing.json")
