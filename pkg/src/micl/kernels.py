"""Hot pixel-loop kernels: compiled core with a pure numpy/scipy fallback.

The compiled extension (micl._kernels._core) is used when importable;
otherwise the fallback in micl._kernels.pure takes over. Setting the
environment variable MICL_PURE_PYTHON=1 forces the fallback. Both
backends are bit-for-bit equivalent: they consume identical inputs and
accumulate distances in the same order.
"""
from __future__ import annotations

import os
from typing import Optional

import numpy as np

from micl._kernels import pure as _pure

try:
    from micl._kernels import _core as _compiled
except ImportError:  # extension not built; fall back silently
    _compiled = None

# Label values shared with micl.geometry (kept here to avoid an import cycle).
UNLABELED = -2
BACKGROUND = -1

if _compiled is None or os.environ.get("MICL_PURE_PYTHON"):
    _impl = _pure
    BACKEND = "pure"
else:
    _impl = _compiled
    BACKEND = "compiled"


def largest_component(binary: np.ndarray) -> Optional[tuple[int, int, int, int, int]]:
    """Largest 4-connected component of a binary (H, W) uint8 grid.

    Returns (size, y_min, x_min, y_max, x_max) with a half-open box, or
    None for an all-zero grid. Size ties break to the lowest
    (y_min, x_min) of the component box.
    """
    return _impl.largest_component(binary)


def grow_step(
    features: np.ndarray,
    labels: np.ndarray,
    cats: np.ndarray,
    means: np.ndarray,
    tau_sq: float,
) -> int:
    """One synchronous region-growing iteration; updates labels in place.

    An UNLABELED pixel with a 4-neighbor labeled cats[i] (in the label
    snapshot taken at entry) adopts that label when the squared L2
    distance between its feature vector and means[i] is <= tau_sq. With
    several admissible categories the smallest distance wins, ties going
    to the earliest entry in cats (callers pass cats ascending). Returns
    the number of adopted pixels.
    """
    return _impl.grow_step(features, labels, cats, means, tau_sq)


def available_backends() -> dict[str, object]:
    """Backends importable in this environment, keyed by name."""
    out: dict[str, object] = {"pure": _pure}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out
