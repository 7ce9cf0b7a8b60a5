"""File formats: PGM masks and label maps, RGB PNG images, FMGRID01 attention maps, CSV grids."""

from __future__ import annotations

import csv
import re
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .attention import AttentionMap
from .grid import as_image, as_labels, as_mask

FMGRID_MAGIC = b"FMGRID01"


def _read_pgm_raw(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    # Header: magic, width, height, maxval separated by whitespace; '#' comments allowed.
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    width, height, maxval = (int(t) for t in tokens[1:])
    pos += 1  # single whitespace byte after maxval
    if maxval < 256:
        arr = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    else:
        arr = np.frombuffer(data, dtype=">u2", count=width * height, offset=pos)
    return arr.reshape(height, width)


def _write_pgm_raw(path, arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype=np.uint8)
    rows, cols = arr.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (cols, rows))
        fh.write(arr.tobytes())


def read_mask(path) -> np.ndarray:
    return _read_pgm_raw(path) > 0


def write_mask(path, mask) -> None:
    _write_pgm_raw(path, as_mask(mask).astype(np.uint8) * 255)


def read_labels(path) -> np.ndarray:
    return as_labels(_read_pgm_raw(path))


def write_labels(path, labels) -> None:
    _write_pgm_raw(path, as_labels(labels))


def read_image(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def write_image(path, img) -> None:
    img = as_image(img)
    Image.fromarray(np.round(img * 255.0).astype(np.uint8), mode="RGB").save(path, format="PNG")


def read_fmgrid(path) -> AttentionMap:
    data = Path(path).read_bytes()
    if data[:8] != FMGRID_MAGIC:
        raise ValueError(f"{path}: bad magic, expected {FMGRID_MAGIC!r}")
    rows, cols, tokens = struct.unpack_from("<III", data, 8)
    count = rows * cols * tokens
    if len(data) != 20 + 4 * count:
        raise ValueError(f"{path}: expected {20 + 4 * count} bytes, found {len(data)}")
    grids = np.frombuffer(data, dtype="<f4", count=count, offset=20).reshape(tokens, rows, cols)
    return AttentionMap(np.moveaxis(grids.astype(np.float64), 0, -1))


def write_fmgrid(path, amap: AttentionMap) -> None:
    grids = np.moveaxis(amap.scores, -1, 0).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(FMGRID_MAGIC)
        fh.write(struct.pack("<III", amap.rows, amap.cols, amap.token_count))
        fh.write(grids.tobytes())


_TOKEN_RE = re.compile(r"(\d+)$")


def read_csv_grids(directory) -> AttentionMap:
    """Load one CSV grid per token; the trailing integer of each file stem is the token index."""
    found = {}
    for p in Path(directory).glob("*.csv"):
        m = _TOKEN_RE.search(p.stem)
        if m is None:
            continue
        idx = int(m.group(1))
        if idx in found:
            raise ValueError(f"duplicate token index {idx} in {directory}")
        with open(p, newline="") as fh:
            found[idx] = np.array([[float(v) for v in row] for row in csv.reader(fh) if row])
    if not found:
        raise ValueError(f"no token CSV files in {directory}")
    if sorted(found) != list(range(len(found))):
        raise ValueError(f"token indices must be 0..{len(found) - 1}, got {sorted(found)}")
    return AttentionMap(np.stack([found[k] for k in range(len(found))], axis=-1))


def read_attention(path) -> AttentionMap:
    p = Path(path)
    if p.is_dir():
        return read_csv_grids(p)
    if p.suffix == ".csv":
        with open(p, newline="") as fh:
            grid = np.array([[float(v) for v in row] for row in csv.reader(fh) if row])
        return AttentionMap(grid[:, :, None])
    return read_fmgrid(p)
