"""Matplotlib rendering of refinement trajectories to image files.

Figures are written next to the delimited trajectory output so a run
directory is self-describing: loss/metric curves plus a panel of mask
snapshots against the ground-truth contour.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .exactdt import exact_contour
from .refine import RefineTrajectory


def save_refine_figures(trajectory: RefineTrajectory, gt_mask: np.ndarray,
                        out_dir) -> list[str]:
    """Render curve and snapshot figures for one refinement run; returns the
    written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    entries = trajectory.entries
    steps = [e.step for e in entries]

    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.4))
    axes[0].plot(steps, [e.loss for e in entries], label="total", color="k")
    axes[0].plot(steps, [e.bce for e in entries], label="bce", ls="--")
    axes[0].plot(steps, [e.contour for e in entries], label="aux", ls=":")
    axes[0].set_xlabel("step")
    axes[0].set_ylabel("loss")
    axes[0].legend(frameon=False)
    axes[1].plot(steps, [e.iou for e in entries], label="iou")
    axes[1].plot(steps, [e.bf1 for e in entries], label="boundary F1")
    axes[1].plot(steps, [e.meandist for e in entries], label="mean dist")
    axes[1].set_xlabel("step")
    axes[1].legend(frameon=False)
    fig.tight_layout()
    curve_path = out / "refine_curves.png"
    fig.savefig(curve_path, dpi=110)
    plt.close(fig)
    written.append(str(curve_path))

    snapshots = [e for e in entries if e.snapshot is not None]
    if snapshots:
        gt_outline = exact_contour(gt_mask)
        cols = min(len(snapshots), 5)
        picks = snapshots if len(snapshots) <= cols else [
            snapshots[round(i * (len(snapshots) - 1) / (cols - 1))] for i in range(cols)]
        fig, axes = plt.subplots(1, cols, figsize=(2.2 * cols, 2.6))
        if cols == 1:
            axes = [axes]
        for ax, entry in zip(axes, picks):
            rgb = np.stack([entry.snapshot] * 3, axis=-1)
            rgb[gt_outline == 1.0] = (1.0, 0.2, 0.2)  # GT contour overlay
            ax.imshow(rgb, interpolation="nearest")
            ax.set_title(f"step {entry.step}", fontsize=9)
            ax.set_xticks([])
            ax.set_yticks([])
        fig.tight_layout()
        snap_path = out / "refine_masks.png"
        fig.savefig(snap_path, dpi=110)
        plt.close(fig)
        written.append(str(snap_path))
    return written
