"""Command-line interface.

Subcommands: dt, loss, gradcheck, synth, refine, bench. Results go to
stdout as one JSON line with floats printed at 17 significant digits, so
repeated runs with fixed seeds are byte-identical. Exit codes: 0 success,
2 input-format error, 3 contract violation, 1 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .autodiff import Tape, grad_check
from .exactdt import exact_contour, exact_kstep_dt
from .grid import ContractViolation, FormatError, hard_binarize, validate_binary_mask
from .io import read_pgm, read_tensor, write_pgm, write_tensor
from .losses import (LossConfig, contour_distance, mse_contour_loss,
                     mse_edge_loss)
from .refine import (Lcg64, RefineConfig, Scenario, ShapeSpec, refine,
                     synth_shape)
from .softdt import SoftDtConfig, contour_response_grid, soft_kstep_dt_grid
from . import losses as _losses


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        return "{" + ",".join(f"{json.dumps(k)}:{_fmt(v)}" for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_fmt(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _emit(payload: dict) -> None:
    sys.stdout.write(_fmt(payload) + "\n")


def _dt_config(args, stabilized: bool) -> SoftDtConfig:
    return SoftDtConfig(k=args.k, stabilized=stabilized)


def _cmd_dt(args) -> int:
    grid = read_pgm(args.mask)
    if args.mode == "exact":
        contour = exact_contour(hard_binarize(grid, 0.5))
        result = exact_kstep_dt(contour, args.k).astype(np.float64)
    else:
        config = _dt_config(args, stabilized=args.mode == "soft-stabilized")
        result = soft_kstep_dt_grid(contour_response_grid(grid), config)
    write_tensor(result, args.out)
    if args.png_preview:
        write_pgm(np.clip(result / (args.k + 1), 0.0, 1.0), args.png_preview)
    _emit({
        "command": "dt", "mode": args.mode, "k": args.k,
        "height": result.shape[0], "width": result.shape[1],
        "min": float(result.min()), "max": float(result.max()),
        "out": str(args.out),
    })
    return 0


_LOSS_FUNCS = {
    "contour": contour_distance,
    "mse-edge": mse_edge_loss,
    "mse-dt": mse_contour_loss,
}


def _load_grid(path) -> np.ndarray:
    if str(path).endswith(".clf1"):
        return read_tensor(path)
    return read_pgm(path)


def _cmd_loss(args) -> int:
    pred = _load_grid(args.pred)
    gt = validate_binary_mask(read_pgm(args.gt), "gt_mask")
    config = LossConfig(epsilon=args.epsilon,
                        softdt=SoftDtConfig(k=args.k, stabilized=args.stabilized))
    report = _LOSS_FUNCS[args.loss](pred, gt, config)
    if args.grad:
        write_tensor(report.grad, args.grad)
    _emit({
        "command": "loss", "loss": args.loss, "k": args.k,
        "epsilon": args.epsilon, "value": report.value,
        "breakdown": report.breakdown,
    })
    return 0


_GRAPHS = {
    "contour": _losses.contour_distance_graph,
    "mse-edge": _losses.mse_edge_graph,
    "mse-dt": _losses.mse_contour_graph,
}


def gradcheck_inputs(size: int, seed: int):
    """Deterministic gradcheck problem: a centered disk mask and a uniform
    [0, 1) response drawn from the committed generator."""
    gt = synth_shape(ShapeSpec("disk", size, size, radius=max(2, size // 4)))
    rng = Lcg64(seed)
    pred = np.array([rng.uniform() for _ in range(size * size)]).reshape(size, size)
    return pred, gt


def _cmd_gradcheck(args) -> int:
    pred, gt = gradcheck_inputs(args.size, args.seed)
    config = LossConfig(softdt=SoftDtConfig(k=args.k, stabilized=args.stabilized))
    graph = _GRAPHS[args.loss]

    def fn(tape: Tape, root):
        out, _ = graph(tape, root, gt, config)
        return out

    error = grad_check(fn, pred, args.h)
    _emit({
        "command": "gradcheck", "loss": args.loss, "size": args.size,
        "seed": args.seed, "k": args.k, "h": args.h, "max_rel_error": error,
    })
    return 0


def _cmd_synth(args) -> int:
    spec = ShapeSpec.from_json(json.loads(Path(args.spec_json).read_text()))
    mask = synth_shape(spec)
    write_pgm(mask, args.out)
    _emit({
        "command": "synth", "kind": spec.kind,
        "height": spec.height, "width": spec.width,
        "foreground": int(mask.sum()), "out": str(args.out),
    })
    return 0


def _scenario_from_json(obj: dict):
    spec = ShapeSpec.from_json(obj["shape"])
    scenario = Scenario(
        shape=spec,
        shift=tuple(obj.get("shift", (0, 0))),
        noise_sigma=float(obj.get("noise_sigma", 0.0)),
        noise_seed=int(obj.get("noise_seed", 0)),
    )
    cfg = obj.get("config", {})
    config = RefineConfig(
        steps=int(cfg.get("steps", 300)),
        learning_rate=float(cfg.get("learning_rate", 0.5)),
        w_bce=float(cfg.get("w_bce", 1.0)),
        w_contour=float(cfg.get("w_contour", 1.0)),
        aux_loss=str(cfg.get("aux_loss", "contour")),
        loss=LossConfig(
            epsilon=float(cfg.get("epsilon", 1e-6)),
            softdt=SoftDtConfig(k=int(cfg.get("k", 2)),
                                stabilized=bool(cfg.get("stabilized", False))),
        ),
        snapshot_every=int(cfg.get("snapshot_every", 50)),
        warmstart_steps=int(cfg.get("warmstart_steps", 0)),
        metric_k=int(cfg.get("k", 2)),
    )
    return scenario, config


def _cmd_refine(args) -> int:
    from .report import save_refine_figures  # matplotlib import deferred to use

    scenario, config = _scenario_from_json(json.loads(Path(args.spec_json).read_text()))
    pred, gt = scenario.build()
    trajectory = refine(pred, gt, config)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trajectory.to_csv(out / "trajectory.csv")
    write_pgm(gt, out / "gt_mask.pgm")
    for entry in trajectory.entries:
        if entry.snapshot is not None:
            write_pgm(entry.snapshot, out / f"snap_{entry.step:05d}.pgm")
    final_mask = hard_binarize(trajectory.entries[-1].snapshot, 0.5)
    write_pgm(final_mask, out / "final_mask.pgm")
    figures = save_refine_figures(trajectory, gt, out)
    final = trajectory.final
    _emit({
        "command": "refine", "steps": config.steps,
        "loss": final.loss, "bce": final.bce, "contour": final.contour,
        "iou": final.iou, "bf1": final.bf1, "meandist": final.meandist,
        "out_dir": str(out), "figures": [str(f) for f in figures],
    })
    return 0


def _cmd_bench(args) -> int:
    from .autodiff import backward, gap
    from .softdt import contour_response, soft_kstep_dt

    spec = ShapeSpec("disk", args.size, args.size, radius=args.size // 3)
    mask = synth_shape(spec)
    response = contour_response_grid(mask)
    config = SoftDtConfig(k=args.k)

    def soft_once() -> None:
        tape = Tape()
        out = gap(soft_kstep_dt(tape.root(response), config))
        backward(tape, 1.0)

    exact_spec = ShapeSpec("disk", args.exact_size, args.exact_size,
                           radius=args.exact_size // 3)
    exact_mask_contour = exact_contour(synth_shape(exact_spec))

    def exact_once() -> None:
        exact_kstep_dt(exact_mask_contour, args.k)

    def best_seconds(fn) -> float:
        best = float("inf")
        for _ in range(args.iters):
            start = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - start)
        return best

    soft_time = best_seconds(soft_once)
    exact_time = best_seconds(exact_once)
    _emit({
        "command": "bench", "k": args.k, "iters": args.iters,
        "soft_size": args.size,
        "soft_seconds": soft_time,
        "soft_pixels_per_second": args.size * args.size / soft_time,
        "exact_size": args.exact_size,
        "exact_seconds": exact_time,
        "exact_pixels_per_second": args.exact_size * args.exact_size / exact_time,
    })
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contourdt",
        description="Truncated distance transforms and contour losses on pixel grids.")
    sub = parser.add_subparsers(dest="command", required=True)

    dt = sub.add_parser("dt", help="distance transform of a mask image")
    dt.add_argument("mask", help="input mask (PGM)")
    dt.add_argument("--k", type=int, default=2)
    dt.add_argument("--mode", choices=("exact", "soft", "soft-stabilized"),
                    default="exact")
    dt.add_argument("--out", required=True, help="output grid (CLF1)")
    dt.add_argument("--png-preview", default=None, metavar="OUT.PGM",
                    help="grayscale preview scaled by 1/(k+1)")
    dt.set_defaults(func=_cmd_dt)

    loss = sub.add_parser("loss", help="loss between a prediction and a GT mask")
    loss.add_argument("pred", help="predicted response (.clf1 or .pgm)")
    loss.add_argument("gt", help="ground-truth binary mask (PGM)")
    loss.add_argument("--loss", choices=tuple(_LOSS_FUNCS), default="contour")
    loss.add_argument("--k", type=int, default=2)
    loss.add_argument("--epsilon", type=float, default=1e-6)
    loss.add_argument("--stabilized", action="store_true")
    loss.add_argument("--grad", default=None, metavar="OUT.CLF1",
                      help="write the response gradient")
    loss.set_defaults(func=_cmd_loss)

    gc = sub.add_parser("gradcheck", help="finite-difference gradient check")
    gc.add_argument("--size", type=int, default=16)
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--loss", choices=tuple(_GRAPHS), default="contour")
    gc.add_argument("--k", type=int, default=2)
    gc.add_argument("--h", type=float, default=1e-5)
    gc.add_argument("--stabilized", action="store_true")
    gc.set_defaults(func=_cmd_gradcheck)

    synth = sub.add_parser("synth", help="rasterize a synthetic shape")
    synth.add_argument("--spec-json", required=True)
    synth.add_argument("--out", required=True, help="output mask (PGM)")
    synth.set_defaults(func=_cmd_synth)

    ref = sub.add_parser("refine", help="gradient-descent mask refinement run")
    ref.add_argument("--spec-json", required=True)
    ref.add_argument("--out-dir", required=True)
    ref.set_defaults(func=_cmd_refine)

    bench = sub.add_parser("bench", help="throughput smoke benchmark")
    bench.add_argument("--size", type=int, default=256)
    bench.add_argument("--exact-size", type=int, default=1024)
    bench.add_argument("--k", type=int, default=2)
    bench.add_argument("--iters", type=int, default=3)
    bench.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ContractViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
