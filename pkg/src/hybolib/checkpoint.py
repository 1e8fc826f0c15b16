"""Flat parameter archives.

An archive is a ``.npz`` file holding one array per parameter, keyed
``<module-path>.<param-name>``, plus a ``__header__`` entry: a JSON document
with the format name and version, the scalar width, every key's shape, and
free-form metadata (model kind, config).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT = "hybolib-params"
VERSION = 1
HEADER_KEY = "__header__"


class CheckpointError(ValueError):
    pass


def save(path, state, meta=None):
    """Write ``state`` (name -> array) to ``path``; returns the header dict."""
    state = {k: np.asarray(v) for k, v in state.items()}
    if HEADER_KEY in state:
        raise CheckpointError(f"{HEADER_KEY!r} is reserved")
    widths = {v.dtype.itemsize * 8 for v in state.values() if v.dtype.kind == "f"}
    if len(widths) > 1:
        raise CheckpointError(f"mixed scalar widths {sorted(widths)}")
    header = {
        "format": FORMAT,
        "version": VERSION,
        "scalar_bits": widths.pop() if widths else 64,
        "shapes": {k: list(v.shape) for k, v in state.items()},
        "meta": meta or {},
    }
    path = Path(path)
    with open(path, "wb") as fh:
        np.savez(fh, **state, **{HEADER_KEY: np.array(json.dumps(header))})
    return header


def load(path):
    """Return ``(state, header)``; raises CheckpointError on a bad header or shape."""
    with np.load(Path(path), allow_pickle=False) as archive:
        if HEADER_KEY not in archive.files:
            raise CheckpointError(f"{path}: missing header")
        header = json.loads(str(archive[HEADER_KEY]))
        if header.get("format") != FORMAT:
            raise CheckpointError(f"{path}: not a {FORMAT} archive")
        if header.get("version", 0) > VERSION:
            raise CheckpointError(f"{path}: version {header['version']} is newer than {VERSION}")
        state = {k: archive[k] for k in archive.files if k != HEADER_KEY}
    for k, shape in header["shapes"].items():
        if k not in state or list(state[k].shape) != shape:
            raise CheckpointError(f"{path}: entry {k!r} missing or reshaped")
    return state, header
