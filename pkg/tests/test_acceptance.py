"""Acceptance suite: one test per criterion, each printing a PASS line with
its measured margin. Run with `pytest tests/test_acceptance.py -v -s`."""

import json
import subprocess
import sys
import time
from statistics import median

import numpy as np
import pytest

from conftest import hard_kstep_dt, random_binary_mask
from contourdt import (ARM_ORDER, LossConfig, ShapeSpec, SoftDtConfig, Tape,
                       brute_force_dt, contour_distance, contour_points,
                       default_scenarios, exact_contour, exact_kstep_dt,
                       gap, grad_check, mse_contour_loss, mse_edge_loss,
                       run_comparison, soft_kstep_dt, soft_kstep_dt_grid,
                       synth_shape, translate_mask)
from contourdt.autodiff import backward
from contourdt.losses import (contour_distance_graph, mse_contour_graph,
                              mse_edge_graph)
from contourdt.softdt import contour_response


def _report(name: str, detail: str) -> None:
    print(f"ACCEPT {name}: PASS ({detail})")


def _square(shift=0):
    mask = np.zeros((28, 28))
    mask[9:19, 9:19] = 1.0
    return translate_mask(mask, shift, 0) if shift else mask


def _logits(mask):
    return np.where(mask == 1.0, 10.0, -10.0)


def test_criterion_1_oracle_equivalence():
    """exact_kstep_dt equals brute_force_dt on 200 random 16x16 masks for
    every k in 1..6, within 5 seconds."""
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    checked = 0
    for i in range(200):
        mask = random_binary_mask(rng, (16, 16), rng.uniform(0.02, 0.5))
        contour = exact_contour(mask)
        points = contour_points(contour)
        for k in range(1, 7):
            fast = exact_kstep_dt(contour, k)
            oracle = brute_force_dt(points, contour.shape, k)
            assert np.array_equal(fast, oracle), (i, k)
            checked += 1
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    _report("1 oracle equivalence", f"{checked} grids integer-equal in {elapsed:.2f}s")


def test_criterion_2_idealized_recurrence_equivalence():
    """The accumulation recurrence with exact binary dilation substituted
    for the soft operator reproduces exact_kstep_dt on the same corpus."""
    rng = np.random.default_rng(2024)
    checked = 0
    for i in range(200):
        mask = random_binary_mask(rng, (16, 16), rng.uniform(0.02, 0.5))
        contour = exact_contour(mask)
        for k in range(1, 7):
            hard = hard_kstep_dt(contour, k)
            exact = exact_kstep_dt(contour, k).astype(float)
            assert np.array_equal(hard, exact), (i, k)
            checked += 1
    _report("2 idealized recurrence", f"{checked} grids integer-equal")


def test_criterion_3_soft_dt_ring_fidelity():
    """Ring-averaged soft transform output strictly increases with the exact
    Chebyshev ring distance (rings 0..k): literal mode through k = 5,
    stabilized mode through k = 6. Literal mode at k = 6 degrades: its ring
    separation collapses by ~11 orders of magnitude."""
    shapes = [
        ShapeSpec("disk", 28, 28, radius=7),
        ShapeSpec("rectangle", 28, 28, rect_height=12, rect_width=9),
        ShapeSpec("convex-polygon", 28, 28, seed=3, radius=8, num_vertices=6),
        ShapeSpec("disk", 28, 28, radius=5),
        ShapeSpec("rectangle", 28, 28, rect_height=6, rect_width=14),
    ]

    def min_ring_gap(k: int, stabilized: bool) -> float:
        worst = np.inf
        for spec in shapes:
            contour = exact_contour(synth_shape(spec))
            rings = exact_kstep_dt(contour, k)
            soft = soft_kstep_dt_grid(contour, SoftDtConfig(k=k, stabilized=stabilized))
            means = []
            for r in range(k + 1):
                selector = rings == r
                assert selector.any()
                means.append(float(soft[selector].mean()))
            worst = min(worst, float(np.min(np.diff(means))))
        return worst

    for k in range(1, 6):
        assert min_ring_gap(k, stabilized=False) > 0.0, f"literal k={k}"
    for k in range(1, 7):
        assert min_ring_gap(k, stabilized=True) > 0.0, f"stabilized k={k}"
    literal_k5 = min_ring_gap(5, stabilized=False)
    literal_k6 = min_ring_gap(6, stabilized=False)
    stabilized_k6 = min_ring_gap(6, stabilized=True)
    # documented literal-mode degradation: background drift erases the
    # ring structure (separation drops below 1e-6 by k = 6)
    assert literal_k6 < 1e-6 < stabilized_k6
    _report("3 soft-DT ring fidelity",
            f"literal k<=5 ok (k=5 gap {literal_k5:.1e}), stabilized k<=6 ok "
            f"(k=6 gap {stabilized_k6:.2f}), literal k=6 collapsed to {literal_k6:.1e}")


def test_criterion_4_differentiability():
    """Analytic gradients of the three losses match central differences
    (h = 1e-5) to better than 1e-4 at 5 seeds on 16x16, within 60 s."""
    gt = synth_shape(ShapeSpec("disk", 16, 16, radius=4))
    config = LossConfig(softdt=SoftDtConfig(k=2))
    graphs = {
        "contour": contour_distance_graph,
        "mse-edge": mse_edge_graph,
        "mse-dt": mse_contour_graph,
    }
    start = time.perf_counter()
    worst = 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        pred = rng.uniform(0, 1, (16, 16))
        for name, graph in graphs.items():
            def fn(tape, root, graph=graph):
                out, _ = graph(tape, root, gt, config)
                return out

            error = grad_check(fn, pred, 1e-5)
            assert error < 1e-4, (name, seed, error)
            worst = max(worst, error)
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    _report("4 differentiability",
            f"15 checks, worst rel error {worst:.2e} in {elapsed:.1f}s")


def test_criterion_5_identity_behavior():
    mask = _square()
    logits = _logits(mask)
    contour_value = contour_distance(logits, mask).value
    edge_value = mse_edge_loss(logits, mask).value
    dt_value = mse_contour_loss(logits, mask).value
    assert contour_value <= 0.05
    assert edge_value <= 1e-6
    assert dt_value <= 1e-6
    _report("5 identity behavior",
            f"contour {contour_value:.4f} <= 0.05, mse-edge {edge_value:.1e}, "
            f"mse-dt {dt_value:.1e}")


def test_criterion_6_translation_monotonicity():
    mask = _square()
    config = LossConfig(epsilon=1e-6, softdt=SoftDtConfig(k=2))
    values = [contour_distance(_logits(_square(shift)), mask, config).value
              for shift in (0, 1, 2)]
    assert values[0] < values[1] < values[2]
    _report("6 translation monotonicity",
            "d(0)={:.4f} < d(1)={:.4f} < d(2)={:.4f}".format(*values))


def test_criterion_7_refinement_efficacy():
    """Four-arm comparison over 20 seeded scenarios: the contour arm's
    median final boundary-F beats plain BCE strictly, and the median
    ordering contour >= mse-dt >= mse-edge >= bce holds."""
    start = time.perf_counter()
    results = run_comparison(default_scenarios(20))
    elapsed = time.perf_counter() - start
    medians = {arm: median(m.boundary_f1 for m in results[arm]) for arm in ARM_ORDER}
    assert medians["contour"] > medians["bce"]
    assert medians["contour"] >= medians["mse-dt"] >= medians["mse-edge"] >= medians["bce"]
    assert elapsed < 600.0
    _report("7 refinement efficacy",
            "median bf1 " + " >= ".join(f"{arm}={medians[arm]:.4f}" for arm in ARM_ORDER)
            + f" in {elapsed:.0f}s")


def _run_cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "contourdt.cli", *args],
                          capture_output=True, text=True, cwd=cwd)


def test_criterion_8_cli_determinism(tmp_path):
    """Fixed-seed CLI invocations produce byte-identical stdout and files."""
    synth_spec = {"kind": "convex-polygon", "height": 28, "width": 28,
                  "seed": 11, "radius": 8, "num_vertices": 6}
    refine_spec = {
        "shape": {"kind": "disk", "height": 28, "width": 28, "radius": 6},
        "shift": [0, 2], "noise_sigma": 2.5, "noise_seed": 5,
        "config": {"steps": 8, "learning_rate": 4.0, "snapshot_every": 4},
    }
    snapshots = []
    for trial in ("one", "two"):
        cwd = tmp_path / trial
        cwd.mkdir()
        (cwd / "synth.json").write_text(json.dumps(synth_spec))
        (cwd / "refine.json").write_text(json.dumps(refine_spec))
        outputs = {}
        commands = [
            ["synth", "--spec-json", "synth.json", "--out", "mask.pgm"],
            ["dt", "mask.pgm", "--k", "2", "--mode", "exact",
             "--out", "exact.clf1", "--png-preview", "exact.pgm"],
            ["dt", "mask.pgm", "--k", "2", "--mode", "soft-stabilized",
             "--out", "soft.clf1"],
            ["loss", "mask.pgm", "mask.pgm", "--loss", "contour",
             "--grad", "grad.clf1"],
            ["gradcheck", "--size", "12", "--seed", "1"],
            ["refine", "--spec-json", "refine.json", "--out-dir", "run"],
        ]
        for cmd in commands:
            result = _run_cli(cmd, cwd)
            assert result.returncode == 0, (cmd, result.stderr)
            outputs[" ".join(cmd)] = result.stdout
        for path in sorted(cwd.rglob("*")):
            if path.is_file() and path.suffix != ".json":
                outputs[str(path.relative_to(cwd))] = path.read_bytes()
        snapshots.append(outputs)
    assert snapshots[0].keys() == snapshots[1].keys()
    for key in snapshots[0]:
        assert snapshots[0][key] == snapshots[1][key], key
    _report("8 CLI determinism",
            f"{len(snapshots[0])} artifacts byte-identical across runs")


def test_criterion_9_performance_smoke():
    """Soft transform (k=2) forward+backward on 256x256 under 100 ms; exact
    transform on 1024x1024 under 50 ms (best of 5)."""
    response = np.asarray(
        synth_shape(ShapeSpec("disk", 256, 256, radius=80)))
    from contourdt import contour_response_grid
    response = contour_response_grid(response)
    config = SoftDtConfig(k=2)

    def soft_once():
        tape = Tape()
        gap(soft_kstep_dt(tape.root(response), config))
        backward(tape, 1.0)

    contour_big = exact_contour(synth_shape(ShapeSpec("disk", 1024, 1024, radius=300)))

    def exact_once():
        exact_kstep_dt(contour_big, 2)

    def best_of(fn, repeats=5):
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        return best

    soft_time = best_of(soft_once)
    exact_time = best_of(exact_once)
    assert soft_time < 0.100, f"soft fwd+bwd took {soft_time * 1e3:.1f} ms"
    assert exact_time < 0.050, f"exact took {exact_time * 1e3:.1f} ms"
    _report("9 performance smoke",
            f"soft 256^2 fwd+bwd {soft_time * 1e3:.1f} ms, "
            f"exact 1024^2 {exact_time * 1e3:.1f} ms")
