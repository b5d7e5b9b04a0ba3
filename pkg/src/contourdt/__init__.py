"""Differentiable truncated distance transforms and contour losses on grids."""

from .autodiff import (SMOOTH, SOBEL_X, SOBEL_Y, Tape, Var, abs_map, add,
                       backward, conv3x3, divide, gap, grad_check, hadamard,
                       offset, scale, sigmoid_binarize, stable_sigmoid)
from .exactdt import (brute_force_dt, contour_points, exact_contour,
                      exact_kstep_dt)
from .grid import (BinaryMask, ContractViolation, FormatError, Grid, IntGrid,
                   as_grid, hard_binarize, validate_binary_mask, validate_grid)
from .io import read_pgm, read_tensor, write_pgm, write_tensor
from .losses import (BatchLossReport, LossConfig, LossReport, bce_mask_loss,
                     contour_distance, contour_loss_batch, mse_contour_loss,
                     mse_edge_loss)
from .refine import (ARM_ORDER, BoundaryMetrics, Lcg64, RefineConfig,
                     RefineStep, RefineTrajectory, Scenario, ShapeSpec,
                     boundary_metrics, comparison_config, default_scenarios,
                     perturb, refine, run_comparison, synth_shape,
                     translate_mask)
from .softdt import (SoftDtConfig, contour_response, contour_response_grid,
                     soft_dilate, soft_kstep_dt, soft_kstep_dt_grid,
                     soft_mask, soft_mask_grid)

__version__ = "0.1.0"

__all__ = [
    "ARM_ORDER", "BatchLossReport", "BinaryMask", "BoundaryMetrics",
    "ContractViolation", "FormatError", "Grid", "IntGrid", "Lcg64",
    "LossConfig", "LossReport", "RefineConfig", "RefineStep",
    "RefineTrajectory", "SMOOTH", "SOBEL_X", "SOBEL_Y", "Scenario",
    "ShapeSpec", "SoftDtConfig", "Tape", "Var", "abs_map", "add", "as_grid",
    "backward", "bce_mask_loss", "boundary_metrics", "brute_force_dt",
    "comparison_config", "contour_distance", "contour_loss_batch",
    "contour_points", "contour_response", "contour_response_grid", "conv3x3",
    "default_scenarios", "divide", "exact_contour", "exact_kstep_dt", "gap",
    "grad_check", "hadamard", "hard_binarize", "mse_contour_loss",
    "mse_edge_loss", "offset", "perturb", "read_pgm", "read_tensor",
    "refine", "run_comparison", "scale", "sigmoid_binarize", "soft_dilate",
    "soft_kstep_dt", "soft_kstep_dt_grid", "soft_mask", "soft_mask_grid",
    "stable_sigmoid", "synth_shape", "translate_mask", "validate_binary_mask",
    "validate_grid", "write_pgm", "write_tensor",
]
