"""Desk-scale refinement harness: seeded synthetic shapes, perturbed
logit predictions, plain gradient descent under mixed losses, and boundary
quality metrics.

The optimization variable is a grid of pixel logits. The pixelwise BCE term
reads the logits directly; the contour-based auxiliary terms read the mask
response sigma(logits), with that slope-1 sigmoid recorded on the tape so
their gradients land on the logits as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tape, backward, sigmoid_binarize, stable_sigmoid
from .exactdt import exact_contour, exact_kstep_dt
from .grid import (BinaryMask, ContractViolation, hard_binarize,
                   validate_binary_mask, validate_grid)
from .losses import (LossConfig, bce_mask_loss, contour_distance_graph,
                     mse_contour_graph, mse_edge_graph)
from .softdt import SoftDtConfig

_LCG_MULT = 6364136223846793005
_LCG_INC = 1442695040888963407
_U64_MASK = (1 << 64) - 1


class Lcg64:
    """Committed deterministic generator, reproducible from the formulas:

    state  <- (6364136223846793005 * state + 1442695040888963407) mod 2^64
    uniform = ((state >> 11) + 0.5) / 2^53                    in (0, 1)
    normal  = sqrt(-2 ln u1) * cos(2 pi u2)   (two uniforms per normal)
    integer(n) = floor(uniform * n), clipped to n - 1
    """

    def __init__(self, seed: int):
        self.state = int(seed) & _U64_MASK

    def next_u64(self) -> int:
        self.state = (_LCG_MULT * self.state + _LCG_INC) & _U64_MASK
        return self.state

    def uniform(self) -> float:
        return ((self.next_u64() >> 11) + 0.5) / float(1 << 53)

    def normal(self) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normal_grid(self, height: int, width: int) -> np.ndarray:
        flat = np.array([self.normal() for _ in range(height * width)])
        return flat.reshape(height, width)

    def integer(self, bound: int) -> int:
        return min(int(self.uniform() * bound), bound - 1)


@dataclass(frozen=True)
class ShapeSpec:
    """Deterministic synthetic mask description.

    Rasterization uses integer arithmetic only, so masks are identical
    across platforms. Shapes are centered on the canvas and must keep a
    margin of at least 2 pixels to every border.
    """

    kind: str  # disk | rectangle | convex-polygon
    height: int
    width: int
    seed: int = 0
    radius: int = 5          # disk and convex-polygon circumradius
    rect_height: int = 6
    rect_width: int = 8
    num_vertices: int = 6    # convex-polygon

    def __post_init__(self):
        if self.kind not in ("disk", "rectangle", "convex-polygon"):
            raise ContractViolation(f"unknown shape kind {self.kind!r}")
        if self.height < 1 or self.width < 1:
            raise ContractViolation("canvas must be at least 1x1")

    @classmethod
    def from_json(cls, obj: dict) -> "ShapeSpec":
        allowed = {"kind", "height", "width", "seed", "radius",
                   "rect_height", "rect_width", "num_vertices"}
        unknown = set(obj) - allowed
        if unknown:
            raise ContractViolation(f"unknown shape spec fields: {sorted(unknown)}")
        return cls(**obj)


def _require_margin(rmin, rmax, cmin, cmax, height, width):
    if rmin < 2 or cmin < 2 or rmax > height - 3 or cmax > width - 3:
        raise ContractViolation(
            f"shape bounding box ({rmin}..{rmax}, {cmin}..{cmax}) leaves less "
            f"than a 2-pixel margin on a {height}x{width} canvas")


def _convex_hull(points):
    """Monotone-chain convex hull of integer (x, y) points, CCW order."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _polygon_vertices(spec: ShapeSpec):
    """Seeded integer vertices on a jittered circle, reduced to their hull."""
    if spec.num_vertices < 3:
        raise ContractViolation("convex-polygon needs at least 3 vertices")
    if spec.radius < 2:
        raise ContractViolation("convex-polygon radius must be at least 2")
    rng = Lcg64(spec.seed)
    cy, cx = spec.height // 2, spec.width // 2
    n = spec.num_vertices
    points = []
    for i in range(n):
        angle = 2.0 * math.pi * (i + 0.7 * rng.uniform()) / n
        rho = spec.radius * (0.6 + 0.4 * rng.uniform())
        x = cx + int(round(rho * math.cos(angle)))
        y = cy + int(round(rho * math.sin(angle)))
        points.append((x, y))
    hull = _convex_hull(points)
    if len(hull) < 3:
        raise ContractViolation(
            f"seed {spec.seed} degenerated to a {len(hull)}-point polygon")
    return hull


def synth_shape(spec: ShapeSpec) -> BinaryMask:
    """Rasterize the spec into a binary mask, deterministically."""
    h, w = spec.height, spec.width
    cy, cx = h // 2, w // 2
    if spec.kind == "disk":
        r = spec.radius
        if r < 0:
            raise ContractViolation("disk radius must be non-negative")
        _require_margin(cy - r, cy + r, cx - r, cx + r, h, w)
        yy, xx = np.indices((h, w))
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    elif spec.kind == "rectangle":
        rh, rw = spec.rect_height, spec.rect_width
        if rh < 1 or rw < 1:
            raise ContractViolation("rectangle sides must be at least 1")
        top, left = cy - rh // 2, cx - rw // 2
        _require_margin(top, top + rh - 1, left, left + rw - 1, h, w)
        mask = np.zeros((h, w), dtype=bool)
        mask[top:top + rh, left:left + rw] = True
    else:
        hull = _polygon_vertices(spec)
        xs = [p[0] for p in hull]
        ys = [p[1] for p in hull]
        _require_margin(min(ys), max(ys), min(xs), max(xs), h, w)
        yy, xx = np.indices((h, w))
        mask = np.ones((h, w), dtype=bool)
        m = len(hull)
        for i in range(m):
            x0, y0 = hull[i]
            x1, y1 = hull[(i + 1) % m]
            # hull is CCW in (x, y): interior lies on the left of each edge
            mask &= (x1 - x0) * (yy - y0) - (y1 - y0) * (xx - x0) >= 0
    return mask.astype(np.float64)


def translate_mask(mask, dr: int, dc: int) -> BinaryMask:
    """Shift a mask by whole pixels; every foreground pixel must stay on
    the canvas."""
    m = validate_binary_mask(mask)
    h, w = m.shape
    rows, cols = np.nonzero(m)
    if rows.size:
        nr, nc = rows + dr, cols + dc
        if nr.min() < 0 or nr.max() >= h or nc.min() < 0 or nc.max() >= w:
            raise ContractViolation(
                f"shift ({dr}, {dc}) pushes the mask out of the {h}x{w} canvas")
        out = np.zeros_like(m)
        out[nr, nc] = 1.0
        return out
    return m.copy()


def perturb(mask, shift=(0, 0), logit_noise_sigma: float = 0.0,
            seed: int = 0) -> np.ndarray:
    """Synthetic prediction: the mask shifted by (dr, dc), encoded as +6/-6
    logits, plus seeded Gaussian noise. sigma(6) is saturated enough to look
    binary after thresholding but still carries usable BCE gradient."""
    if logit_noise_sigma < 0:
        raise ContractViolation("noise sigma must be non-negative")
    shifted = translate_mask(mask, int(shift[0]), int(shift[1]))
    logits = np.where(shifted == 1.0, 6.0, -6.0)
    if logit_noise_sigma > 0:
        rng = Lcg64(seed)
        logits = logits + logit_noise_sigma * rng.normal_grid(*logits.shape)
    return logits


@dataclass(frozen=True)
class BoundaryMetrics:
    iou: float
    boundary_f1: float
    mean_contour_dist: float


def _mean_contour_distance(pred_contour, gt_contour, k: int) -> float:
    """Symmetric mean of each contour's coverage on the other's exact
    truncated distance map. An empty side contributes the full truncation
    value k + 1."""
    pred_pts = pred_contour == 1.0
    gt_pts = gt_contour == 1.0
    if not pred_pts.any() and not gt_pts.any():
        return 0.0
    gt_dt = exact_kstep_dt(gt_contour, k)
    pred_dt = exact_kstep_dt(pred_contour, k)
    pred_side = float(gt_dt[pred_pts].mean()) if pred_pts.any() else float(k + 1)
    gt_side = float(pred_dt[gt_pts].mean()) if gt_pts.any() else float(k + 1)
    return 0.5 * (pred_side + gt_side)


def _boundary_f1(pred_contour, gt_contour) -> float:
    pred_pts = pred_contour == 1.0
    gt_pts = gt_contour == 1.0
    if not pred_pts.any() and not gt_pts.any():
        return 1.0
    if not pred_pts.any() or not gt_pts.any():
        return 0.0
    near_gt = exact_kstep_dt(gt_contour, 1) <= 1
    near_pred = exact_kstep_dt(pred_contour, 1) <= 1
    precision = float(near_gt[pred_pts].mean())
    recall = float(near_pred[gt_pts].mean())
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def boundary_metrics(pred_mask, gt_mask, k: int = 2) -> BoundaryMetrics:
    """Mask IoU, boundary F-score at 1-pixel Chebyshev tolerance, and the
    symmetric mean truncated contour distance (truncation k + 1)."""
    pred = validate_binary_mask(pred_mask, "pred_mask")
    gt = validate_binary_mask(gt_mask, "gt_mask")
    if pred.shape != gt.shape:
        raise ContractViolation(
            f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    pred_fg = pred == 1.0
    gt_fg = gt == 1.0
    if not pred_fg.any() and not gt_fg.any():
        return BoundaryMetrics(1.0, 1.0, 0.0)
    union = np.count_nonzero(pred_fg | gt_fg)
    iou = np.count_nonzero(pred_fg & gt_fg) / union
    pred_contour = exact_contour(pred)
    gt_contour = exact_contour(gt)
    return BoundaryMetrics(
        iou=float(iou),
        boundary_f1=_boundary_f1(pred_contour, gt_contour),
        mean_contour_dist=_mean_contour_distance(pred_contour, gt_contour, k),
    )


_AUX_GRAPHS = {
    "contour": contour_distance_graph,
    "mse-edge": mse_edge_graph,
    "mse-dt": mse_contour_graph,
}
AUX_LOSSES = ("contour", "mse-edge", "mse-dt", "none")


@dataclass(frozen=True)
class RefineConfig:
    """Gradient-descent settings. w_contour weighs whichever auxiliary loss
    aux_loss selects; warmstart_steps runs the leading steps with the
    auxiliary term disabled (BCE only)."""

    steps: int = 300
    learning_rate: float = 0.5
    w_bce: float = 1.0
    w_contour: float = 1.0
    aux_loss: str = "contour"
    loss: LossConfig = field(default_factory=LossConfig)
    snapshot_every: int = 50
    warmstart_steps: int = 0
    metric_k: int = 2

    def __post_init__(self):
        if self.steps < 1:
            raise ContractViolation(f"steps must be >= 1, got {self.steps}")
        if not self.learning_rate > 0:
            raise ContractViolation("learning_rate must be positive")
        if self.w_bce < 0 or self.w_contour < 0:
            raise ContractViolation("loss weights must be non-negative")
        if self.w_bce == 0 and self.w_contour == 0:
            raise ContractViolation("at least one loss weight must be positive")
        if self.aux_loss not in AUX_LOSSES:
            raise ContractViolation(f"unknown aux_loss {self.aux_loss!r}")
        if self.snapshot_every < 1:
            raise ContractViolation("snapshot_every must be >= 1")
        if self.warmstart_steps < 0:
            raise ContractViolation("warmstart_steps must be >= 0")


@dataclass
class RefineStep:
    step: int
    loss: float
    bce: float
    contour: float  # auxiliary-term value; column name fixed by the CSV contract
    iou: float
    bf1: float
    meandist: float
    snapshot: np.ndarray | None = None


TRAJECTORY_HEADER = ("step", "loss", "bce", "contour", "iou", "bf1", "meandist")


@dataclass
class RefineTrajectory:
    entries: list[RefineStep]
    final_logits: np.ndarray

    @property
    def final(self) -> RefineStep:
        return self.entries[-1]

    def to_csv(self, path) -> None:
        lines = [",".join(TRAJECTORY_HEADER)]
        for e in self.entries:
            lines.append(",".join(
                [str(e.step)] + [format(v, ".17g") for v in
                                 (e.loss, e.bce, e.contour, e.iou, e.bf1, e.meandist)]))
        Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def _aux_on_logits(logits, gt, kind: str, config: LossConfig):
    """Value and logit-gradient of an auxiliary loss evaluated on the mask
    response sigma(logits)."""
    tape = Tape()
    response = sigmoid_binarize(tape.root(logits), 1.0, 0.0)
    out, _ = _AUX_GRAPHS[kind](tape, response, gt, config)
    return float(out.value), backward(tape, 1.0)


def _loss_and_grad(pred, gt, config: RefineConfig, step: int):
    try:
        return _loss_and_grad_inner(pred, gt, config, step)
    except FloatingPointError as exc:
        raise FloatingPointError(f"non-finite loss or gradient at step {step}") from exc


def _loss_and_grad_inner(pred, gt, config: RefineConfig, step: int):
    bce = bce_mask_loss(pred, gt)
    aux_value = 0.0
    aux_grad = None
    if config.aux_loss != "none" and config.w_contour > 0:
        aux_value, aux_grad = _aux_on_logits(pred, gt, config.aux_loss, config.loss)
    w_aux = config.w_contour if step >= config.warmstart_steps else 0.0
    total = config.w_bce * bce.value + w_aux * aux_value
    grad = config.w_bce * bce.grad
    if aux_grad is not None and w_aux > 0:
        grad = grad + w_aux * aux_grad
    return total, grad, bce.value, aux_value


def _make_entry(step, total, bce_value, aux_value, pred, gt,
                config: RefineConfig, with_snapshot: bool) -> RefineStep:
    response = stable_sigmoid(pred)
    metrics = boundary_metrics(hard_binarize(response, 0.5), gt, config.metric_k)
    return RefineStep(
        step=step, loss=total, bce=bce_value, contour=aux_value,
        iou=metrics.iou, bf1=metrics.boundary_f1,
        meandist=metrics.mean_contour_dist,
        snapshot=response if with_snapshot else None,
    )


def refine(pred_logits, gt_mask, config: RefineConfig = RefineConfig()) -> RefineTrajectory:
    """Plain gradient descent on pixel logits under
    w_bce * BCE + w_contour * aux. Entries are recorded every
    snapshot_every steps plus one final entry after the last update."""
    pred = np.array(validate_grid(pred_logits, "pred_logits"), copy=True)
    gt = validate_binary_mask(gt_mask, "gt_mask")
    if pred.shape != gt.shape:
        raise ContractViolation(
            f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    entries: list[RefineStep] = []
    for step in range(config.steps):
        total, grad, bce_value, aux_value = _loss_and_grad(pred, gt, config, step)
        if not np.isfinite(total) or not np.all(np.isfinite(grad)):
            raise FloatingPointError(f"non-finite loss or gradient at step {step}")
        if step % config.snapshot_every == 0:
            entries.append(_make_entry(step, total, bce_value, aux_value,
                                       pred, gt, config, with_snapshot=True))
        pred -= config.learning_rate * grad
    total, _, bce_value, aux_value = _loss_and_grad(pred, gt, config, config.steps)
    if not np.isfinite(total):
        raise FloatingPointError(f"non-finite loss at step {config.steps}")
    entries.append(_make_entry(config.steps, total, bce_value, aux_value,
                               pred, gt, config, with_snapshot=True))
    return RefineTrajectory(entries=entries, final_logits=pred)


@dataclass(frozen=True)
class Scenario:
    """One seeded shifted-shape refinement problem."""

    shape: ShapeSpec
    shift: tuple[int, int]
    noise_sigma: float
    noise_seed: int

    def build(self):
        gt = synth_shape(self.shape)
        pred = perturb(gt, self.shift, self.noise_sigma, self.noise_seed)
        return pred, gt


_SHIFTS = ((2, 0), (0, 2), (-2, 0), (0, -2), (2, 1), (-1, 2), (1, -2), (-2, -1))

ARM_ORDER = ("contour", "mse-dt", "mse-edge", "bce")


def default_scenarios(count: int = 20, height: int = 28, width: int = 28,
                      noise_sigma: float = 2.5) -> list[Scenario]:
    """Seeded mix of disks, rectangles and convex polygons with cyclic
    sub-pixel-free shifts; used by the four-arm loss comparison."""
    scenarios = []
    for i in range(count):
        kind = ("disk", "rectangle", "convex-polygon")[i % 3]
        if kind == "disk":
            spec = ShapeSpec(kind, height, width, seed=i, radius=5 + i % 3)
        elif kind == "rectangle":
            spec = ShapeSpec(kind, height, width, seed=i,
                             rect_height=8 + i % 4, rect_width=12 - i % 3)
        else:
            spec = ShapeSpec(kind, height, width, seed=i,
                             radius=6 + i % 3, num_vertices=5 + i % 3)
        scenarios.append(Scenario(
            shape=spec,
            shift=_SHIFTS[i % len(_SHIFTS)],
            noise_sigma=noise_sigma,
            noise_seed=1000 + i,
        ))
    return scenarios


def comparison_config(arm: str, steps: int = 300, learning_rate: float = 8.0,
                      stabilized: bool = True) -> RefineConfig:
    """Shared settings for the four comparison arms. The budget moves a
    saturated logit by about lr * steps / pixels ~ 3, so plain BCE flips
    only noise-advantaged pixels and leaves a ragged boundary; the
    auxiliary losses differ in how effectively they spend the same budget
    near the boundary."""
    if arm not in ARM_ORDER:
        raise ContractViolation(f"unknown arm {arm!r}")
    loss_cfg = LossConfig(softdt=SoftDtConfig(stabilized=stabilized))
    if arm == "bce":
        return RefineConfig(steps=steps, learning_rate=learning_rate,
                            w_bce=1.0, w_contour=0.0, aux_loss="none",
                            loss=loss_cfg, snapshot_every=max(1, steps // 4))
    return RefineConfig(steps=steps, learning_rate=learning_rate,
                        w_bce=1.0, w_contour=1.0, aux_loss=arm,
                        loss=loss_cfg, snapshot_every=max(1, steps // 4))


def run_comparison(scenarios, steps: int = 300, learning_rate: float = 8.0):
    """Run every scenario under all four arms; returns
    {arm: [final BoundaryMetrics per scenario]}."""
    results = {arm: [] for arm in ARM_ORDER}
    for scenario in scenarios:
        pred, gt = scenario.build()
        for arm in ARM_ORDER:
            config = comparison_config(arm, steps=steps, learning_rate=learning_rate)
            traj = refine(pred, gt, config)
            final = traj.final
            results[arm].append(BoundaryMetrics(final.iou, final.bf1, final.meandist))
    return results
