"""Exact truncated Chebyshev distance transforms.

Non-differentiable counterparts of the soft pipeline, used as ground truth
for its ring structure and as inference-time metrics. The metric is
Chebyshev (8-connected) because one round of 3x3 dilation grows a region by
exactly one Chebyshev unit.
"""

from __future__ import annotations

import numpy as np

from .grid import ContractViolation, IntGrid, validate_binary_mask
from .softdt import contour_response_grid

ContourSet = list  # list of (row, col) int pairs, unique, in range


def exact_contour(mask) -> np.ndarray:
    """Binary contour image: the support of the Sobel contour response.

    Defined through the same stencil as the differentiable path so both
    paths always describe the same set of pixels.
    """
    m = validate_binary_mask(mask)
    return (contour_response_grid(m) > 0.0).astype(np.float64)


def contour_points(contour_mask) -> ContourSet:
    """Coordinates of contour pixels in row-major order."""
    m = validate_binary_mask(contour_mask, "contour mask")
    return [(int(r), int(c)) for r, c in np.argwhere(m == 1.0)]


def _check_k(k) -> int:
    if not (isinstance(k, (int, np.integer)) and not isinstance(k, bool) and k >= 1):
        raise ContractViolation(f"k must be an integer >= 1, got {k!r}")
    return int(k)


def _dilate_bool(m: np.ndarray) -> np.ndarray:
    h, w = m.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = m
    out = np.zeros_like(m)
    for du in range(3):
        for dv in range(3):
            out |= padded[du:du + h, dv:dv + w]
    return out


def exact_kstep_dt(contour_mask, k: int) -> IntGrid:
    """Chebyshev distance to the nearest contour pixel, truncated at k + 1.

    Multi-source breadth-first expansion: one 8-connected dilation round per
    distance level, k rounds total. An empty contour yields the constant
    k + 1 everywhere.
    """
    k = _check_k(k)
    m = validate_binary_mask(contour_mask, "contour mask")
    reached = m == 1.0
    out = np.full(m.shape, k + 1, dtype=np.int64)
    out[reached] = 0
    for dist in range(1, k + 1):
        grown = _dilate_bool(reached)
        out[grown & ~reached] = dist
        reached = grown
    return out


def brute_force_dt(contour, shape, k: int) -> IntGrid:
    """Literal minimum over contour points of the Chebyshev distance,
    truncated at k + 1. O(pixels * points); intended as a test oracle."""
    k = _check_k(k)
    height, width = shape
    if height < 1 or width < 1:
        raise ContractViolation(f"shape must be positive, got {shape}")
    points = [(int(r), int(c)) for r, c in contour]
    if len(set(points)) != len(points):
        raise ContractViolation("contour set contains duplicate points")
    rows, cols = np.indices((height, width))
    best = np.full((height, width), k + 1, dtype=np.int64)
    for r, c in points:
        if not (0 <= r < height and 0 <= c < width):
            raise ContractViolation(f"contour point ({r}, {c}) outside {shape}")
        np.minimum(best, np.maximum(np.abs(rows - r), np.abs(cols - c)), out=best)
    return best
