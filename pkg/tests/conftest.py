"""Shared test helpers: reference implementations kept deliberately
independent of the library's fast paths."""

import numpy as np


def hard_kstep_dt(contour: np.ndarray, k: int) -> np.ndarray:
    """The accumulation recurrence with exact binary 3x3 dilation in place
    of the soft operator; reproduces the integer truncated transform."""
    mask = contour.copy().astype(float)
    coverage = mask.copy()
    h, w = contour.shape
    for _ in range(k):
        padded = np.zeros((h + 2, w + 2))
        padded[1:-1, 1:-1] = mask
        dilated = np.zeros_like(mask)
        for du in range(3):
            for dv in range(3):
                dilated = np.maximum(dilated, padded[du:du + h, dv:dv + w])
        mask = dilated
        coverage = coverage + mask
    return (k + 1) - coverage


def random_binary_mask(rng: np.random.Generator, shape, density) -> np.ndarray:
    return (rng.uniform(0, 1, shape) < density).astype(float)
