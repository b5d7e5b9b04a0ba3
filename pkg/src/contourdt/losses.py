"""Contour-alignment losses with analytic gradients to the mask response.

Each public loss returns a LossReport: scalar value, gradient grid with
respect to the predicted response, and a breakdown of per-term scalars.
The ground-truth side of every graph is recorded as constants, so no
gradient flows into it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import (Tape, Var, add, backward, divide, gap, hadamard,
                       offset, scale, stable_sigmoid)
from .grid import ContractViolation, validate_binary_mask, validate_grid
from .softdt import SoftDtConfig, contour_response, soft_kstep_dt, soft_mask


@dataclass(frozen=True)
class LossConfig:
    """epsilon guards the normalizing denominators against empty contours;
    detach_pred_dt freezes the predicted distance map to a constant weight
    (ablation switch), leaving gradient flow through the response term only."""

    epsilon: float = 1e-6
    softdt: SoftDtConfig = field(default_factory=SoftDtConfig)
    detach_pred_dt: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ContractViolation(f"epsilon must be positive, got {self.epsilon}")


@dataclass
class LossReport:
    """Scalar loss plus its gradient w.r.t. the predicted mask response."""

    value: float
    grad: np.ndarray
    breakdown: dict[str, float]


@dataclass
class BatchLossReport:
    """Batch mean with per-pair gradients, each already scaled by 1/N."""

    value: float
    grads: list[np.ndarray]
    pair_values: list[float]


def _checked_pair(pred_response, gt_mask):
    pred = validate_grid(pred_response, "pred_response")
    gt = validate_binary_mask(gt_mask, "gt_mask")
    if pred.shape != gt.shape:
        raise ContractViolation(
            f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    return pred, gt


def contour_distance_graph(tape: Tape, response: Var, gt: np.ndarray,
                           config: LossConfig):
    """Record the symmetric normalized-coverage distance on `tape`.

    Both contour responses are read against the other side's soft distance
    map; each coverage mean is normalized by that response's own mass. The
    result is scale-invariant in the predicted response magnitude and is
    minimized by moving predicted contour mass onto the ground-truth contour.
    """
    cfg = config.softdt
    eps = config.epsilon
    pred_contour = contour_response(soft_mask(response, cfg))
    gt_contour = contour_response(tape.constant(gt))
    dt_source = tape.constant(pred_contour.value) if config.detach_pred_dt else pred_contour
    pred_dt = soft_kstep_dt(dt_source, cfg)
    gt_dt = soft_kstep_dt(gt_contour, cfg)

    pred_mass = gap(pred_contour)
    gt_mass = gap(gt_contour)
    pred_term = divide(offset(gap(hadamard(pred_contour, gt_dt)), eps),
                       offset(pred_mass, eps))
    gt_term = divide(offset(gap(hadamard(gt_contour, pred_dt)), eps),
                     offset(gt_mass, eps))
    dist = scale(add(pred_term, gt_term), 0.5)
    breakdown = {
        "pred_term": float(pred_term.value),
        "gt_term": float(gt_term.value),
        "pred_contour_mass": float(pred_mass.value),
        "gt_contour_mass": float(gt_mass.value),
        "degenerate_gt": float(gt_mass.value == 0.0),
    }
    return dist, breakdown


def mse_edge_graph(tape: Tape, response: Var, gt: np.ndarray, config: LossConfig):
    """Mean squared difference of the two contour responses."""
    cfg = config.softdt
    pred_contour = contour_response(soft_mask(response, cfg))
    gt_contour = contour_response(tape.constant(gt))
    diff = add(pred_contour, scale(gt_contour, -1.0))
    return gap(hadamard(diff, diff)), {}


def mse_contour_graph(tape: Tape, response: Var, gt: np.ndarray, config: LossConfig):
    """Mean squared difference of the two soft k-step distance maps."""
    cfg = config.softdt
    pred_dt = soft_kstep_dt(contour_response(soft_mask(response, cfg)), cfg)
    gt_dt = soft_kstep_dt(contour_response(tape.constant(gt)), cfg)
    diff = add(pred_dt, scale(gt_dt, -1.0))
    return gap(hadamard(diff, diff)), {}


def _run_report(graph, pred_response, gt_mask, config: LossConfig) -> LossReport:
    pred, gt = _checked_pair(pred_response, gt_mask)
    tape = Tape()
    out, breakdown = graph(tape, tape.root(pred), gt, config)
    grad = backward(tape, 1.0)
    value = float(out.value)
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise FloatingPointError("loss or gradient is not finite")
    return LossReport(value, grad, breakdown)


def contour_distance(pred_response, gt_mask,
                     config: LossConfig = LossConfig()) -> LossReport:
    """Normalized coverage distance between predicted and GT contours.

    Near-coincident sharp contours can drive the value slightly below zero:
    the soft distance maps dip negative where the raw contour response
    exceeds 1, and the coverage means inherit that. The value is bounded and
    still minimal exactly at coincidence.
    """
    return _run_report(contour_distance_graph, pred_response, gt_mask, config)


def mse_edge_loss(pred_response, gt_mask,
                  config: LossConfig = LossConfig()) -> LossReport:
    """Mean squared contour-response error."""
    return _run_report(mse_edge_graph, pred_response, gt_mask, config)


def mse_contour_loss(pred_response, gt_mask,
                     config: LossConfig = LossConfig()) -> LossReport:
    """Mean squared soft-distance-map error."""
    return _run_report(mse_contour_graph, pred_response, gt_mask, config)


def contour_loss_batch(pairs, config: LossConfig = LossConfig()) -> BatchLossReport:
    """Arithmetic mean of contour_distance over (pred_response, gt_mask)
    pairs; per-pair gradients come back scaled by 1/N."""
    pairs = list(pairs)
    if not pairs:
        raise ContractViolation("batch must contain at least one pair")
    n = len(pairs)
    reports = [contour_distance(pred, gt, config) for pred, gt in pairs]
    return BatchLossReport(
        value=float(sum(r.value for r in reports)) / n,
        grads=[r.grad / n for r in reports],
        pair_values=[r.value for r in reports],
    )


def bce_mask_loss(pred_response, gt_mask) -> LossReport:
    """Mean binary cross-entropy of sigmoid(pred_response) against the mask,
    in the standard overflow-free formulation. Gradient is
    (sigmoid(x) - y) / (H * W)."""
    pred, gt = _checked_pair(pred_response, gt_mask)
    per_pixel = np.maximum(pred, 0.0) - pred * gt + np.log1p(np.exp(-np.abs(pred)))
    value = float(np.mean(per_pixel))
    grad = (stable_sigmoid(pred) - gt) / pred.size
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise FloatingPointError("loss or gradient is not finite")
    return LossReport(value, grad, {})
