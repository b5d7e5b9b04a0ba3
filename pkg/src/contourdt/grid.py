"""Dense 2-D grids: construction, validation, binarization.

Grids are plain float64 numpy arrays. The aliases below name the three
conventions used throughout the library; validation helpers enforce them at
API boundaries. All operations treat grids as immutable.
"""

from __future__ import annotations

import numpy as np

Grid = np.ndarray        # 2-D float64, all values finite
BinaryMask = np.ndarray  # 2-D float64, values exactly 0.0 or 1.0
IntGrid = np.ndarray     # 2-D integer, non-negative


class ContractViolation(ValueError):
    """An operation was called outside its contract."""


class FormatError(ValueError):
    """A file or byte stream does not match its declared format."""


def as_grid(values) -> Grid:
    """Build a validated float64 grid from nested sequences or an array."""
    return validate_grid(np.asarray(values, dtype=np.float64))


def validate_grid(grid, name: str = "grid") -> Grid:
    """Check shape and finiteness; returns the grid as float64."""
    arr = np.asarray(grid)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ContractViolation(
            f"{name} must be 2-D with positive shape, got shape {arr.shape}")
    if arr.dtype != np.float64:
        arr = arr.astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} contains NaN or Inf")
    return arr


def validate_binary_mask(mask, name: str = "mask") -> BinaryMask:
    arr = validate_grid(mask, name)
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise ContractViolation(f"{name} must contain only 0.0 and 1.0")
    return arr


def hard_binarize(grid, threshold: float) -> BinaryMask:
    """Threshold a grid to {0, 1}. Ties map to 0 (strict greater-than), which
    makes repeated binarization a no-op."""
    if not (0.0 < threshold < 1.0):
        raise ContractViolation(f"threshold must lie in (0, 1), got {threshold}")
    arr = validate_grid(grid)
    return (arr > threshold).astype(np.float64)
