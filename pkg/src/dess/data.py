"""Ratings and item-feature file ingestion.

Ratings files are comma-delimited, one interaction per line:
``user_id,item_id,rating,timestamp``.  Item-feature files are tab-delimited:
``item_id<TAB>v1,v2,...,vf`` with a consistent dimension across lines.
Parsed streams are stably sorted by timestamp, so ties keep file order.
"""

import numpy as np

from .harness import Interaction, make_interaction
from .indicators import ItemFeatureStore

__all__ = ["parse_ratings", "write_ratings", "parse_item_features", "read_metrics"]


def _parse_id(token):
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        return token


def parse_ratings(path, delimiter=","):
    """Load a ratings file into a time-sorted interaction list."""
    stream = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(delimiter)
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                user = _parse_id(parts[0])
                item = _parse_id(parts[1])
                rating = float(parts[2])
                timestamp = int(parts[3])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed line: {exc}") from None
            stream.append(make_interaction(user, item, rating, timestamp))
    if not stream:
        raise ValueError(f"{path}: ratings file is empty")
    stream.sort(key=lambda it: it.timestamp)  # stable: ties keep file order
    return stream


def write_ratings(path, interactions):
    """Serialize interactions back to the comma-delimited ratings format."""
    with open(path, "w", encoding="utf-8") as fh:
        for it in interactions:
            fh.write(f"{it.user},{it.item},{it.rating!r},{it.timestamp}\n")


def parse_item_features(path):
    """Load a tab-delimited item-feature file into a feature store."""
    store = ItemFeatureStore()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'item<TAB>v1,v2,...'")
            try:
                vec = np.array([float(v) for v in parts[1].split(",")])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed feature vector: {exc}") from None
            try:
                store.add(_parse_id(parts[0]), vec)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return store


def read_metrics(path):
    """Read a metrics CSV produced by a run back into a list of dicts."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: metrics file is empty")
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        values = line.split(",")
        if len(values) != len(header):
            raise ValueError(f"{path}: row width disagrees with header")
        row = {}
        for name, value in zip(header, values):
            row[name] = int(value) if name in ("t", "emb_params") else float(value)
        rows.append(row)
    return rows
