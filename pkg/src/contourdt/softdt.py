"""Differentiable contour pipeline: soft binarization of mask responses,
Sobel contour responses, one-step soft dilation, and the k-step soft
distance transform built from them.

The transform iterates k rounds of {dilate, accumulate} starting from a
continuous contour response and reflects the accumulated coverage into
distances: far pixels saturate at k + 1, pixels on response mass drop
toward 0 (and below it when raw response values exceed 1; inputs are fed
unclamped on purpose).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (SMOOTH, SOBEL_X, SOBEL_Y, Tape, Var, abs_map, add,
                       conv3x3, offset, scale, sigmoid_binarize,
                       stable_sigmoid)
from .grid import ContractViolation


@dataclass(frozen=True)
class SoftDtConfig:
    """Parameters of the soft contour/distance pipeline.

    k: dilation step count; the transform saturates at k + 1.
    gamma_dilate / t_dilate: slope and threshold of the dilation binarizer.
    gamma_mask / t_mask: slope and threshold of the mask-response binarizer.
    stabilized: re-anchor the dilation sigmoid so zero input stays exactly
        zero. The default (literal) recurrence lets an all-zero background
        drift upward each round (sigmoid(-gamma_dilate * t_dilate) per step),
        which is harmless for small k but washes out ring structure by k = 6.
    """

    k: int = 2
    gamma_dilate: float = 20.0
    t_dilate: float = 0.1
    gamma_mask: float = 20.0
    t_mask: float = 0.5
    stabilized: bool = False

    def __post_init__(self):
        if not (isinstance(self.k, int) and not isinstance(self.k, bool) and self.k >= 1):
            raise ContractViolation(f"k must be an integer >= 1, got {self.k!r}")
        if not (self.gamma_dilate > 0 and self.gamma_mask > 0):
            raise ContractViolation("binarization slopes must be positive")
        for name in ("t_dilate", "t_mask"):
            t = getattr(self, name)
            if not 0.0 < t < 1.0:
                raise ContractViolation(f"{name} must lie in (0, 1), got {t}")


def soft_mask(response: Var, config: SoftDtConfig = SoftDtConfig()) -> Var:
    """Differentiable stand-in for hard mask binarization."""
    return sigmoid_binarize(response, config.gamma_mask, config.t_mask)


def contour_response(mask: Var) -> Var:
    """Half-sum of absolute Sobel responses; zero over constant regions.

    A mask touching the image border produces response at the border: zero
    padding treats everything outside the canvas as background.
    """
    gx = abs_map(conv3x3(mask, SOBEL_X))
    gy = abs_map(conv3x3(mask, SOBEL_Y))
    return scale(add(gx, gy), 0.5)


def dilation_floor(config: SoftDtConfig) -> float:
    """Value the dilation binarizer assigns to an exactly-zero neighborhood."""
    return float(stable_sigmoid(config.gamma_dilate * (0.0 - config.t_dilate)))


def soft_dilate(grid: Var, config: SoftDtConfig = SoftDtConfig()) -> Var:
    """One soft 3x3 dilation: box smoothing, then sharp binarization.

    Stabilized mode rescales the binarizer output so an exactly-zero input
    maps to exactly zero instead of the floor value.
    """
    smoothed = conv3x3(grid, SMOOTH)
    sharp = sigmoid_binarize(smoothed, config.gamma_dilate, config.t_dilate)
    if not config.stabilized:
        return sharp
    floor = dilation_floor(config)
    return scale(offset(sharp, -floor), 1.0 / (1.0 - floor))


def soft_kstep_dt(contour_resp: Var, config: SoftDtConfig = SoftDtConfig()) -> Var:
    """k-step soft distance transform of a continuous contour response.

    Iterates mask <- soft_dilate(mask), coverage <- coverage + mask for k
    rounds (both starting from the input), then returns (k + 1) - coverage.
    """
    mask = contour_resp
    coverage = contour_resp
    for _ in range(config.k):
        mask = soft_dilate(mask, config)
        coverage = add(coverage, mask)
    return offset(scale(coverage, -1.0), float(config.k + 1))


def _run_grid(fn, grid) -> np.ndarray:
    tape = Tape()
    return np.array(fn(tape.root(grid)).value, copy=True)


def soft_mask_grid(response, config: SoftDtConfig = SoftDtConfig()) -> np.ndarray:
    """Forward-only soft_mask on a plain array."""
    return _run_grid(lambda v: soft_mask(v, config), response)


def contour_response_grid(mask) -> np.ndarray:
    """Forward-only contour_response on a plain array."""
    return _run_grid(contour_response, mask)


def soft_kstep_dt_grid(contour_resp, config: SoftDtConfig = SoftDtConfig()) -> np.ndarray:
    """Forward-only soft_kstep_dt on a plain array."""
    return _run_grid(lambda v: soft_kstep_dt(v, config), contour_resp)
