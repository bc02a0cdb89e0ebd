"""Text and JSON serialization of :class:`~wkit.jets.JetField`.

Text format, one sample per line::

    # wkit-jet order=2 dimension=2
    0.5 0.25 | 0,0:1.25 1,0:2 0,1:0 2,0:0 1,1:0 0,2:0

Floats are written with 17 significant digits so a round trip is bit-exact.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .jets import JetField, MultiIndex, index_table, multi_indices

_HEADER = "# wkit-jet"


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def dumps_text(jet: JetField) -> str:
    alphas = multi_indices(jet.dimension, jet.order)
    keys = [",".join(str(e) for e in a) for a in alphas]
    lines = [f"{_HEADER} order={jet.order} dimension={jet.dimension}"]
    for x, row in zip(jet.points, jet.values):
        coords = " ".join(_fmt(v) for v in x)
        vals = " ".join(f"{k}:{_fmt(v)}" for k, v in zip(keys, row))
        lines.append(f"{coords} | {vals}")
    return "\n".join(lines) + "\n"


def loads_text(text: str) -> JetField:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith(_HEADER):
        raise ValueError("missing wkit-jet header")
    meta = dict(tok.split("=") for tok in lines[0][len(_HEADER):].split())
    order, d = int(meta["order"]), int(meta["dimension"])
    tab = index_table(d, order)
    pts, vals = [], []
    for ln in lines[1:]:
        if ln.startswith("#"):
            continue
        left, right = ln.split("|")
        pts.append([float(v) for v in left.split()])
        row = np.full(len(tab.alphas), np.nan)
        for tok in right.split():
            key, val = tok.split(":")
            row[tab.index[MultiIndex(int(e) for e in key.split(","))]] = float(val)
        if np.isnan(row).any():
            raise ValueError(f"incomplete jet row: {ln!r}")
        vals.append(row)
    return JetField(order, np.array(pts).reshape(-1, d), np.array(vals).reshape(-1, len(tab.alphas)))


def to_json_dict(jet: JetField) -> dict:
    return {
        "order": jet.order,
        "dimension": jet.dimension,
        "multi_indices": [list(a) for a in multi_indices(jet.dimension, jet.order)],
        "points": jet.points.tolist(),
        "values": jet.values.tolist(),
    }


def from_json_dict(data: dict) -> JetField:
    order, d = int(data["order"]), int(data["dimension"])
    alphas = data.get("multi_indices")
    vals = np.asarray(data["values"], dtype=float)
    if alphas is not None:
        tab = index_table(d, order)
        perm = [tab.index[MultiIndex(a)] for a in alphas]
        reordered = np.empty_like(vals)
        reordered[:, perm] = vals
        vals = reordered
    return JetField(order, np.asarray(data["points"], dtype=float).reshape(-1, d), vals)


def dumps_json(jet: JetField) -> str:
    return json.dumps(to_json_dict(jet))


def loads_json(text: str) -> JetField:
    return from_json_dict(json.loads(text))


def save_jet(jet: JetField, path) -> None:
    path = Path(path)
    path.write_text(dumps_json(jet) if path.suffix == ".json" else dumps_text(jet))


def load_jet(path) -> JetField:
    path = Path(path)
    text = path.read_text()
    return loads_json(text) if path.suffix == ".json" else loads_text(text)
