"""Report serialization and CSV loaders."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .dp import FiniteKernel
from .errors import ParameterError


def format_float(x: float) -> str:
    """17 significant digits, always readable back as the same float."""
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    text = "%.17g" % x
    if text.lstrip("-").isdigit():
        text += ".0"
    return text


def _plain(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    return obj


def to_json(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON text with floats at 17 significant digits and stable key order."""
    obj = _plain(obj)
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(_plain(v), (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(to_json(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + to_json(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    return json.dumps(str(obj))


def flatten_report(report: dict[str, Any]) -> dict[str, str]:
    """One CSV row: nested maps become ``component.*``, ``param.*`` and ``diagnostic.*`` columns."""
    prefixes = {"components": "component.", "params": "param.", "diagnostics": "diagnostic."}
    row: dict[str, str] = {}

    def cell(v):
        v = _plain(v)
        if isinstance(v, float):
            return format_float(v)
        if isinstance(v, (dict, list)):
            return to_json(v, indent=0).replace("\n", "")
        if v is None:
            return ""
        return str(v)

    for key, value in report.items():
        if key in prefixes and isinstance(value, dict):
            for sub, v in value.items():
                row[prefixes[key] + str(sub)] = cell(v)
        else:
            row[key] = cell(value)
    return row


def write_csv(rows: list[dict[str, Any]], stream) -> None:
    flat = [flatten_report(r) for r in rows]
    fields: list[str] = []
    for row in flat:
        fields.extend(k for k in row if k not in fields)
    writer = csv.DictWriter(stream, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(flat)


def _read_rows(path) -> list[list[str]]:
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise ParameterError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ParameterError(f"{path} is empty")
    return rows


def _floats(row: list[str], path, line: int) -> list[float]:
    try:
        return [float(c) for c in row]
    except ValueError as exc:
        raise ParameterError(f"{path}, row {line}: non-numeric entry ({exc})") from exc


def load_world_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """First row: atom probabilities. Each further row: one hypothesis's losses per atom."""
    rows = _read_rows(path)
    probs = np.array(_floats(rows[0], path, 1))
    losses = [_floats(r, path, i + 2) for i, r in enumerate(rows[1:])]
    if not losses:
        raise ParameterError(f"{path} has no loss rows")
    if any(len(r) != probs.size for r in losses):
        raise ParameterError(f"{path}: every loss row needs {probs.size} entries")
    return probs, np.array(losses)


def load_kernel_csv(path, n: int, m: int, num_hypotheses: int) -> FiniteKernel:
    """Rows ``sample, hypothesis, weight`` where sample is dash-joined atom indices ("0-2-1").

    Missing (sample, hypothesis) pairs have weight zero. A header row is optional.
    """
    rows = _read_rows(path)
    if rows[0][0].strip().lower() in ("sample", "sample_id"):
        rows = rows[1:]
    table = np.zeros((m**n, num_hypotheses))
    for line, row in enumerate(rows, start=1):
        if len(row) != 3:
            raise ParameterError(f"{path}, row {line}: expected sample,hypothesis,weight")
        try:
            atoms = [int(a) for a in row[0].strip().split("-")]
            h = int(row[1])
            weight = float(row[2])
        except ValueError as exc:
            raise ParameterError(f"{path}, row {line}: {exc}") from exc
        if len(atoms) != n or min(atoms) < 0 or max(atoms) >= m:
            raise ParameterError(f"{path}, row {line}: sample {row[0]!r} is not in {{0..{m - 1}}}^{n}")
        if not 0 <= h < num_hypotheses:
            raise ParameterError(f"{path}, row {line}: hypothesis {h} out of range")
        idx = 0
        for a in atoms:
            idx = idx * m + a
        table[idx, h] += weight
    return FiniteKernel(n=n, m=m, table=table)


def load_ls_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Header ``x1,...,xd,y`` then one row per example."""
    rows = _read_rows(path)
    header = [c.strip().lower() for c in rows[0]]
    if len(header) < 2 or header[-1] != "y" or header[:-1] != [f"x{i + 1}" for i in range(len(header) - 1)]:
        raise ParameterError(f"{path}: header must be x1,...,xd,y")
    body = [_floats(r, path, i + 2) for i, r in enumerate(rows[1:])]
    if not body or any(len(r) != len(header) for r in body):
        raise ParameterError(f"{path}: needs at least one row of {len(header)} numbers")
    data = np.array(body)
    return data[:, :-1], data[:, -1]


def load_config(path) -> dict[str, Any]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ParameterError(f"config {path} must hold a JSON object")
    return cfg
