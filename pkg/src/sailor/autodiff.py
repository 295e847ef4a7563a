"""Minimal reverse-mode autodiff over float64 numpy arrays.

A Tape records every differentiable op in execution order; backward replays
the records in exact reverse order, accumulating into leaf gradients. The
graph is rebuilt on every forward pass, so a Tape is single-use. All kernels
are plain numpy/scipy calls with a fixed reduction order, which keeps runs
bitwise reproducible on a fixed machine.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp


class Tensor:
    """A value in the computation graph. Leaf tensors are parameters or constants."""

    __slots__ = ("value", "grad", "requires_grad")

    def __init__(self, value, requires_grad: bool = False):
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.value) if requires_grad else None

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    """Trainable tensor with Adam moment state (zero-initialized) and a step counter."""

    __slots__ = ("m", "v", "step")

    def __init__(self, value):
        super().__init__(value, requires_grad=True)
        self.m = np.zeros_like(self.value)
        self.v = np.zeros_like(self.value)
        self.step = 0

    def copy_value(self) -> np.ndarray:
        return self.value.copy()


def constant(value) -> Tensor:
    return Tensor(value, requires_grad=False)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    """Glorot-uniform weight draw for a fan_in x fan_out matrix."""
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Tape:
    """Ordered record of executed ops; backward traverses it in reverse."""

    def __init__(self):
        self._records: list[Callable[[], None]] = []

    def record(self, backward_fn: Callable[[], None]) -> None:
        self._records.append(backward_fn)

    def backward(self, loss: Tensor) -> None:
        if loss.value.ndim != 0:
            raise ValueError(f"backward expects a scalar loss, got shape {loss.value.shape}")
        if loss.grad is None:
            loss.grad = np.zeros_like(loss.value)
        loss.grad[...] = 1.0
        for fn in reversed(self._records):
            fn()

    def clear(self) -> None:
        self._records.clear()

    def __len__(self):
        return len(self._records)


def _out(tape: Tape, value, inputs: Sequence[Tensor], backward_builder) -> Tensor:
    """Create the output tensor and register its backward rule if needed."""
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(value, requires_grad=needs)
    if needs:
        tape.record(backward_builder(out))
    return out


# ---------------------------------------------------------------------------
# elementwise and structural ops


def add(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    if a.value.shape != b.value.shape:
        raise ValueError(f"add shape mismatch: {a.value.shape} vs {b.value.shape}")

    def build(out):
        def backward():
            if a.requires_grad:
                a.grad += out.grad
            if b.requires_grad:
                b.grad += out.grad
        return backward

    return _out(tape, a.value + b.value, (a, b), build)


def mul(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    if a.value.shape != b.value.shape:
        raise ValueError(f"mul shape mismatch: {a.value.shape} vs {b.value.shape}")

    def build(out):
        def backward():
            if a.requires_grad:
                a.grad += out.grad * b.value
            if b.requires_grad:
                b.grad += out.grad * a.value
        return backward

    return _out(tape, a.value * b.value, (a, b), build)


def scale(tape: Tape, x: Tensor, k: float) -> Tensor:
    def build(out):
        def backward():
            x.grad += k * out.grad
        return backward

    return _out(tape, k * x.value, (x,), build)


def add_const(tape: Tape, x: Tensor, c: float) -> Tensor:
    def build(out):
        def backward():
            x.grad += out.grad
        return backward

    return _out(tape, x.value + c, (x,), build)


def mul_columns(tape: Tape, x: Tensor, v: Tensor) -> Tensor:
    """Scale every row i of x by v[i] (v is length-N, x is N x C)."""
    if v.value.ndim != 1 or x.value.ndim != 2 or v.value.shape[0] != x.value.shape[0]:
        raise ValueError(f"mul_columns shape mismatch: {x.value.shape} vs {v.value.shape}")
    col = v.value[:, None]

    def build(out):
        def backward():
            if x.requires_grad:
                x.grad += out.grad * col
            if v.requires_grad:
                v.grad += np.sum(out.grad * x.value, axis=1)
        return backward

    return _out(tape, x.value * col, (x, v), build)


def relu(tape: Tape, x: Tensor) -> Tensor:
    mask = x.value > 0

    def build(out):
        def backward():
            x.grad += out.grad * mask
        return backward

    return _out(tape, np.where(mask, x.value, 0.0), (x,), build)


def tanh(tape: Tape, x: Tensor) -> Tensor:
    y = np.tanh(x.value)

    def build(out):
        def backward():
            x.grad += out.grad * (1.0 - y * y)
        return backward

    return _out(tape, y, (x,), build)


def sigmoid(tape: Tape, x: Tensor) -> Tensor:
    # 1/(1+exp(-x)) evaluated branch-wise to avoid overflow on large |x|
    y = np.empty_like(x.value)
    pos = x.value >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x.value[pos]))
    ex = np.exp(x.value[~pos])
    y[~pos] = ex / (1.0 + ex)

    def build(out):
        def backward():
            x.grad += out.grad * y * (1.0 - y)
        return backward

    return _out(tape, y, (x,), build)


def exp(tape: Tape, x: Tensor) -> Tensor:
    y = np.exp(x.value)

    def build(out):
        def backward():
            x.grad += out.grad * y
        return backward

    return _out(tape, y, (x,), build)


def softmax_rows(tape: Tape, x: Tensor) -> Tensor:
    """Row-wise softmax with max subtraction for stability."""
    if x.value.ndim != 2:
        raise ValueError(f"softmax_rows expects a matrix, got shape {x.value.shape}")
    shifted = x.value - x.value.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)

    def build(out):
        def backward():
            g = out.grad
            dot = np.sum(g * p, axis=1, keepdims=True)
            x.grad += p * (g - dot)
        return backward

    return _out(tape, p, (x,), build)


def matmul(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.value.shape} @ {b.value.shape}")

    def build(out):
        def backward():
            if a.requires_grad:
                a.grad += out.grad @ b.value.T
            if b.requires_grad:
                b.grad += a.value.T @ out.grad
        return backward

    return _out(tape, a.value @ b.value, (a, b), build)


def transpose(tape: Tape, x: Tensor) -> Tensor:
    def build(out):
        def backward():
            x.grad += out.grad.T
        return backward

    return _out(tape, x.value.T.copy(), (x,), build)


def spmm(tape: Tape, a: sp.csr_matrix, h: Tensor) -> Tensor:
    """Sparse-dense product a @ h. The sparse factor is a constant; the
    gradient w.r.t. h is a.T @ upstream."""
    if a.shape[1] != h.value.shape[0]:
        raise ValueError(f"spmm shape mismatch: {a.shape} @ {h.value.shape}")

    def build(out):
        def backward():
            h.grad += a.T @ out.grad
        return backward

    return _out(tape, a @ h.value, (h,), build)


def row_slice(tape: Tape, x: Tensor, idx: np.ndarray) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)

    def build(out):
        def backward():
            np.add.at(x.grad, idx, out.grad)
        return backward

    return _out(tape, x.value[idx], (x,), build)


def dropout(tape: Tape, x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; draws one mask per call from rng."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return x
    keep = rng.random(x.value.shape) >= rate
    scale_ = 1.0 / (1.0 - rate)

    def build(out):
        def backward():
            x.grad += out.grad * keep * scale_
        return backward

    return _out(tape, x.value * keep * scale_, (x,), build)


# ---------------------------------------------------------------------------
# optimizer


def adam_step(params, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """One Adam update with bias correction, applied in place. Gradients are
    left untouched; callers zero them before the next backward."""
    for p in params:
        p.step += 1
        g = p.grad
        p.m[...] = beta1 * p.m + (1.0 - beta1) * g
        p.v[...] = beta2 * p.v + (1.0 - beta2) * g * g
        m_hat = p.m / (1.0 - beta1 ** p.step)
        v_hat = p.v / (1.0 - beta2 ** p.step)
        p.value -= lr * m_hat / (np.sqrt(v_hat) + eps)


def sgd_step(params, lr: float) -> None:
    for p in params:
        p.step += 1
        p.value -= lr * p.grad


# ---------------------------------------------------------------------------
# verification


def gradcheck(fn: Callable[[Tape], Tensor], inputs: Sequence[Tensor],
              h: float = 1e-5) -> float:
    """Compare tape gradients of a scalar-valued closure against central
    finite differences. Returns the max relative error over all entries of
    all inputs. fn must rebuild the graph from the inputs' current values."""
    for t in inputs:
        t.zero_grad()
    tape = Tape()
    loss = fn(tape)
    tape.backward(loss)
    analytic = [t.grad.copy() for t in inputs]

    worst = 0.0
    for t, an in zip(inputs, analytic):
        flat = t.value.reshape(-1)
        an_flat = an.reshape(-1)
        for i in range(flat.shape[0]):
            orig = flat[i]
            flat[i] = orig + h
            up = float(fn(Tape()).value)
            flat[i] = orig - h
            down = float(fn(Tape()).value)
            flat[i] = orig
            fd = (up - down) / (2.0 * h)
            denom = max(abs(fd), abs(an_flat[i]), 1e-3)
            worst = max(worst, abs(fd - an_flat[i]) / denom)
    return worst
