"""Reverse-mode differentiation over a fixed set of grid primitives.

A Tape records one forward computation rooted at a single differentiable
input grid. Ground-truth-derived grids enter as constants and receive no
gradient. backward() replays the records once, in reverse execution order,
and returns the vector-Jacobian product with respect to the root.

Convolution uses true convolution orientation (kernel flipped) with zero
padding; the backward pass mirrors that choice exactly by convolving the
upstream gradient with the 180-degree-rotated kernel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import ContractViolation, validate_grid

SOBEL_X = np.array([[-1.0, 0.0, 1.0],
                    [-2.0, 0.0, 2.0],
                    [-1.0, 0.0, 1.0]])
SOBEL_Y = np.array([[1.0, 2.0, 1.0],
                    [0.0, 0.0, 0.0],
                    [-1.0, -2.0, -1.0]])
SMOOTH = np.full((3, 3), 1.0 / 9.0)

Kernel3x3 = np.ndarray


def stable_sigmoid(z) -> np.ndarray:
    """Overflow-free logistic function; saturates to exact 0/1 in the tails."""
    z = np.asarray(z, dtype=np.float64)
    positive = z >= 0
    expz = np.exp(np.where(positive, -z, z))  # exponent is never positive
    return np.where(positive, 1.0 / (1.0 + expz), expz / (1.0 + expz))


def _conv3x3_raw(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """True 2-D convolution with a 3x3 kernel, zero padding, same shape:
    out(i, j) = sum_{u,v} kernel[1+u, 1+v] * x(i-u, j-v)."""
    h, w = x.shape
    padded = np.zeros((h + 2, w + 2), dtype=np.float64)
    padded[1:-1, 1:-1] = x
    out = np.zeros((h, w), dtype=np.float64)
    for u in (-1, 0, 1):
        for v in (-1, 0, 1):
            coef = kernel[1 + u, 1 + v]
            if coef != 0.0:
                out += coef * padded[1 - u:1 - u + h, 1 - v:1 - v + w]
    return out


@dataclass
class _Node:
    op: str
    inputs: tuple[int, ...]
    value: np.ndarray
    aux: tuple = ()


class Var:
    """Handle to a value recorded on a tape."""

    __slots__ = ("tape", "index")

    def __init__(self, tape: "Tape", index: int):
        self.tape = tape
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.tape._nodes[self.index].value


class Tape:
    """Execution record with one designated differentiable root grid."""

    def __init__(self):
        self._nodes: list[_Node] = []
        self._root: int | None = None

    def root(self, grid) -> Var:
        """Register the differentiable input. Only one root per tape."""
        if self._root is not None:
            raise ContractViolation("tape already has a root grid")
        arr = np.array(validate_grid(grid, "root"), copy=True)
        var = self._record("root", (), arr)
        self._root = var.index
        return var

    def constant(self, values) -> Var:
        """Register a zero-gradient leaf (ground-truth side, literals)."""
        arr = np.array(values, dtype=np.float64, copy=True)
        if not np.all(np.isfinite(arr)):
            raise ContractViolation("constant contains NaN or Inf")
        return self._record("const", (), arr)

    def _record(self, op: str, inputs: tuple[int, ...], value, aux=()) -> Var:
        self._nodes.append(_Node(op, inputs, np.asarray(value, dtype=np.float64), aux))
        return Var(self, len(self._nodes) - 1)


def _check_var(x, name="operand") -> Var:
    if not isinstance(x, Var):
        raise ContractViolation(f"{name} must be a tape Var, got {type(x).__name__}")
    return x


def _check_pair(a: Var, b: Var) -> Tape:
    _check_var(a)
    _check_var(b)
    if a.tape is not b.tape:
        raise ContractViolation("operands recorded on different tapes")
    if a.value.shape != b.value.shape:
        raise ContractViolation(
            f"shape mismatch: {a.value.shape} vs {b.value.shape}")
    return a.tape


def conv3x3(x: Var, kernel) -> Var:
    """Convolve with a fixed 3x3 kernel, zero padding, same-size output."""
    _check_var(x)
    k = np.asarray(kernel, dtype=np.float64)
    if k.shape != (3, 3) or not np.all(np.isfinite(k)):
        raise ContractViolation("kernel must be a finite 3x3 array")
    return x.tape._record("conv3x3", (x.index,), _conv3x3_raw(x.value, k), aux=(k.copy(),))


def sigmoid_binarize(x: Var, gamma: float, threshold: float) -> Var:
    """Elementwise 1 / (1 + exp(-gamma * (x - threshold)))."""
    _check_var(x)
    gamma = float(gamma)
    if not gamma > 0:
        raise ContractViolation(f"gamma must be positive, got {gamma}")
    value = stable_sigmoid(gamma * (x.value - float(threshold)))
    return x.tape._record("sigmoid", (x.index,), value, aux=(gamma,))


def abs_map(x: Var) -> Var:
    """Elementwise absolute value; subgradient at 0 is 0."""
    _check_var(x)
    return x.tape._record("abs", (x.index,), np.abs(x.value))


def add(a: Var, b: Var) -> Var:
    tape = _check_pair(a, b)
    return tape._record("add", (a.index, b.index), a.value + b.value)


def scale(a: Var, c: float) -> Var:
    _check_var(a)
    c = float(c)
    return a.tape._record("scale", (a.index,), c * a.value, aux=(c,))


def offset(a: Var, c: float) -> Var:
    """Add a scalar constant elementwise."""
    _check_var(a)
    return a.tape._record("offset", (a.index,), a.value + float(c))


def hadamard(a: Var, b: Var) -> Var:
    tape = _check_pair(a, b)
    return tape._record("hadamard", (a.index, b.index), a.value * b.value)


def divide(a: Var, b: Var) -> Var:
    """Elementwise quotient; the caller guarantees a nonzero denominator."""
    tape = _check_pair(a, b)
    return tape._record("divide", (a.index, b.index), a.value / b.value)


def gap(x: Var) -> Var:
    """Global average pooling: mean over all values, producing a scalar."""
    _check_var(x)
    return x.tape._record("gap", (x.index,), np.asarray(np.mean(x.value)))


def _accumulate(grads: list, index: int, delta: np.ndarray) -> None:
    current = grads[index]
    grads[index] = delta if current is None else current + delta


def backward(tape: Tape, seed_grad=1.0) -> np.ndarray:
    """Vector-Jacobian product of the last recorded value w.r.t. the root.

    seed_grad must match the final node's shape (a scalar 1.0 for losses).
    Each record is visited exactly once, in reverse execution order, and
    gradients accumulate over all paths to the root.
    """
    if not tape._nodes:
        raise ContractViolation("backward on an empty tape")
    if tape._root is None:
        raise ContractViolation("tape has no root grid")
    nodes = tape._nodes
    seed = np.asarray(seed_grad, dtype=np.float64)
    if seed.shape != nodes[-1].value.shape:
        raise ContractViolation(
            f"seed gradient shape {seed.shape} does not match "
            f"final value shape {nodes[-1].value.shape}")
    grads: list[np.ndarray | None] = [None] * len(nodes)
    grads[-1] = seed
    for i in range(len(nodes) - 1, -1, -1):
        g = grads[i]
        if g is None:
            continue
        node = nodes[i]
        op = node.op
        if op in ("root", "const"):
            continue
        if op == "conv3x3":
            kernel = node.aux[0]
            _accumulate(grads, node.inputs[0], _conv3x3_raw(g, kernel[::-1, ::-1]))
        elif op == "sigmoid":
            s = node.value
            _accumulate(grads, node.inputs[0], g * (node.aux[0] * s * (1.0 - s)))
        elif op == "abs":
            _accumulate(grads, node.inputs[0], g * np.sign(nodes[node.inputs[0]].value))
        elif op == "add":
            _accumulate(grads, node.inputs[0], g)
            _accumulate(grads, node.inputs[1], g)
        elif op == "scale":
            _accumulate(grads, node.inputs[0], node.aux[0] * g)
        elif op == "offset":
            _accumulate(grads, node.inputs[0], g)
        elif op == "hadamard":
            a, b = node.inputs
            _accumulate(grads, a, g * nodes[b].value)
            _accumulate(grads, b, g * nodes[a].value)
        elif op == "divide":
            a, b = node.inputs
            denom = nodes[b].value
            _accumulate(grads, a, g / denom)
            _accumulate(grads, b, -g * node.value / denom)
        elif op == "gap":
            src = nodes[node.inputs[0]].value
            _accumulate(grads, node.inputs[0], np.full(src.shape, float(g) / src.size))
        else:  # pragma: no cover - unreachable by construction
            raise AssertionError(f"unknown op {op!r}")
    result = grads[tape._root]
    if result is None:
        result = np.zeros_like(nodes[tape._root].value)
    return result


def grad_check(fn: Callable[[Tape, Var], Var], grid, h: float = 1e-5) -> float:
    """Compare the tape gradient of a scalar function against central finite
    differences; returns max |analytic - numeric| / max(1, |analytic|, |numeric|)
    over all pixels."""
    if not (1e-7 <= h <= 1e-3):
        raise ContractViolation(f"step size h={h} outside [1e-7, 1e-3]")
    base = np.array(validate_grid(grid), copy=True)
    tape = Tape()
    out = fn(tape, tape.root(base))
    if np.shape(out.value) != ():
        raise ContractViolation("function under test must produce a scalar")
    analytic = backward(tape, 1.0)

    def value_at(probe: np.ndarray) -> float:
        t = Tape()
        return float(fn(t, t.root(probe)).value)

    numeric = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        saved = base[idx]
        base[idx] = saved + h
        f_plus = value_at(base)
        base[idx] = saved - h
        f_minus = value_at(base)
        base[idx] = saved
        numeric[idx] = (f_plus - f_minus) / (2.0 * h)
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))
