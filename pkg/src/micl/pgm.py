"""Binary PGM (P5, maxval 255) export for saliency planes and masks."""
from __future__ import annotations

import re
from pathlib import Path
from typing import Union

import numpy as np

from micl.kernels import BACKGROUND, UNLABELED


def write_pgm(path: Union[str, Path], gray: np.ndarray) -> None:
    gray = np.asarray(gray)
    if gray.ndim != 2 or gray.dtype != np.uint8:
        raise ValueError("PGM payload must be a 2-D uint8 array")
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(gray).tobytes())


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not m:
        raise ValueError(f"{path} is not a binary PGM")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise ValueError("only maxval 255 is supported")
    pixels = data[m.end() :]
    if len(pixels) != w * h:
        raise ValueError(f"PGM payload has {len(pixels)} bytes, expected {w * h}")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w).copy()


def saliency_to_gray(plane: np.ndarray) -> np.ndarray:
    """Map a normalized [0, 1] plane onto the 0..255 gray scale."""
    plane = np.asarray(plane, dtype=np.float64)
    if plane.min() < 0.0 or plane.max() > 1.0:
        raise ValueError("saliency plane must be normalized into [0, 1]")
    return np.round(plane * 255.0).astype(np.uint8)


def mask_to_gray(labels: np.ndarray) -> np.ndarray:
    """Encode a label mask: unlabeled 0, background 1, category c at c+2."""
    labels = np.asarray(labels)
    out = np.zeros(labels.shape, dtype=np.uint8)
    out[labels == BACKGROUND] = 1
    obj = labels >= 0
    if obj.any():
        if int(labels[obj].max()) > 253:
            raise ValueError("category ids above 253 do not fit one gray byte")
        out[obj] = labels[obj].astype(np.uint8) + 2
    out[labels == UNLABELED] = 0
    return out
