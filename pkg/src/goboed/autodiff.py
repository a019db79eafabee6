"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

A :class:`Tape` records a topologically ordered list of primitive operations;
:func:`backward` runs reverse accumulation from a scalar output and returns
one gradient per registered input. The primitive set is deliberately small --
exactly what the encoder network, reparameterization paths, and forward-model
maps need -- so every adjoint rule is exhaustively testable against central
finite differences.

Re-running the same graph on the same inputs is bit-identical: values are
float64 numpy arrays combined in a fixed order with no threading.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidArgument, ShapeError


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (reverses numpy broadcasting)."""
    grad = np.asarray(grad, dtype=float)
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad.reshape(shape)


@dataclass
class _Node:
    op: str
    parents: tuple
    ctx: tuple  # saved partials / metadata for the backward rule


class Var:
    """Handle to one tape node; supports arithmetic operator overloading."""

    __slots__ = ("tape", "nid")
    __array_priority__ = 100  # keep numpy from hijacking reflected operators

    def __init__(self, tape: "Tape", nid: int):
        self.tape = tape
        self.nid = nid

    @property
    def value(self) -> np.ndarray:
        return self.tape.values[self.nid]

    @property
    def shape(self) -> tuple:
        return self.tape.values[self.nid].shape

    def __add__(self, other):
        return self.tape._binary("add", self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return self.tape._binary("sub", self, other)

    def __rsub__(self, other):
        return self.tape._binary("sub", self.tape.const(other), self)

    def __mul__(self, other):
        return self.tape._binary("mul", self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.tape._binary("div", self, other)

    def __rtruediv__(self, other):
        return self.tape._binary("div", self.tape.const(other), self)

    def __neg__(self):
        return self.tape._binary("mul", self, self.tape.const(-1.0))

    def __matmul__(self, other):
        return self.tape.matmul(self, other)


class Tape:
    """Append-only record of primitive operations and their values."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self.values: list[np.ndarray] = []
        self.inputs: dict[str, int] = {}

    # -- construction -----------------------------------------------------

    def _push(self, op: str, parents: tuple, value: np.ndarray, ctx: tuple = ()) -> Var:
        self.nodes.append(_Node(op, parents, ctx))
        self.values.append(value)
        return Var(self, len(self.nodes) - 1)

    def input(self, name: str, value) -> Var:
        if name in self.inputs:
            raise InvalidArgument(f"duplicate input name {name!r}")
        v = self._push("input", (), _as_array(value))
        self.inputs[name] = v.nid
        return v

    def const(self, value) -> Var:
        if isinstance(value, Var):
            return value
        return self._push("const", (), _as_array(value))

    # -- primitives -------------------------------------------------------

    def _binary(self, op: str, a: Var, b) -> Var:
        b = self.const(b)
        av, bv = a.value, b.value
        try:
            np.broadcast_shapes(av.shape, bv.shape)
        except ValueError as exc:
            raise ShapeError(f"{op}: cannot broadcast {av.shape} with {bv.shape}") from exc
        if op == "add":
            out = av + bv
        elif op == "sub":
            out = av - bv
        elif op == "mul":
            out = av * bv
        elif op == "div":
            out = av / bv
        else:  # pragma: no cover
            raise InvalidArgument(f"unknown binary op {op}")
        return self._push(op, (a.nid, b.nid), out)

    def matmul(self, a: Var, b) -> Var:
        b = self.const(b)
        av, bv = a.value, b.value
        if av.ndim not in (1, 2) or bv.ndim not in (1, 2):
            raise ShapeError("matmul supports 1-D and 2-D operands")
        if av.shape[-1] != bv.shape[0]:
            raise ShapeError(f"matmul: inner dims {av.shape} @ {bv.shape}")
        return self._push("matmul", (a.nid, b.nid), av @ bv)

    def tanh(self, a: Var) -> Var:
        return self._push("tanh", (a.nid,), np.tanh(a.value))

    def sigmoid(self, a: Var) -> Var:
        out = 1.0 / (1.0 + np.exp(-a.value))
        return self._push("sigmoid", (a.nid,), out)

    def exp(self, a: Var) -> Var:
        return self._push("exp", (a.nid,), np.exp(a.value))

    def log(self, a: Var) -> Var:
        if np.any(a.value <= 0):
            raise DomainError("log of nonpositive value")
        return self._push("log", (a.nid,), np.log(a.value))

    def sqrt(self, a: Var) -> Var:
        if np.any(a.value < 0):
            raise DomainError("sqrt of negative value")
        return self._push("sqrt", (a.nid,), np.sqrt(a.value))

    def maximum(self, a: Var, c: float) -> Var:
        """Elementwise max with a constant; subgradient 0 at the kink."""
        return self._push("maximum", (a.nid,), np.maximum(a.value, c), ctx=(float(c),))

    def sum(self, a: Var, axis: int | None = None) -> Var:
        out = a.value.sum(axis=axis)
        return self._push("sum", (a.nid,), _as_array(out), ctx=(axis, a.value.shape))


def backward(tape: Tape, output: Var) -> dict[str, np.ndarray]:
    """Reverse accumulation from a scalar output to every registered input."""
    if np.ndim(output.value) != 0 and np.size(output.value) != 1:
        raise InvalidArgument("backward requires a scalar output node")
    adj: list[np.ndarray | None] = [None] * len(tape.nodes)
    adj[output.nid] = np.ones_like(tape.values[output.nid])

    def accum(nid: int, g: np.ndarray):
        g = _unbroadcast(g, tape.values[nid].shape)
        if adj[nid] is None:
            adj[nid] = g
        else:
            adj[nid] = adj[nid] + g

    for nid in range(output.nid, -1, -1):
        g = adj[nid]
        if g is None:
            continue
        node = tape.nodes[nid]
        op = node.op
        if op in ("input", "const"):
            continue
        if op == "add":
            a, b = node.parents
            accum(a, g)
            accum(b, g)
        elif op == "sub":
            a, b = node.parents
            accum(a, g)
            accum(b, -g)
        elif op == "mul":
            a, b = node.parents
            accum(a, g * tape.values[b])
            accum(b, g * tape.values[a])
        elif op == "div":
            a, b = node.parents
            bv = tape.values[b]
            accum(a, g / bv)
            accum(b, -g * tape.values[a] / (bv * bv))
        elif op == "matmul":
            a, b = node.parents
            av, bv = tape.values[a], tape.values[b]
            if av.ndim == 1 and bv.ndim == 1:
                accum(a, g * bv)
                accum(b, g * av)
            elif av.ndim == 2 and bv.ndim == 2:
                accum(a, g @ bv.T)
                accum(b, av.T @ g)
            elif av.ndim == 1:  # (k,) @ (k,m) -> (m,)
                accum(a, bv @ g)
                accum(b, np.outer(av, g))
            else:  # (n,k) @ (k,) -> (n,)
                accum(a, np.outer(g, bv))
                accum(b, av.T @ g)
        elif op == "tanh":
            (a,) = node.parents
            y = tape.values[nid]
            accum(a, g * (1.0 - y * y))
        elif op == "sigmoid":
            (a,) = node.parents
            y = tape.values[nid]
            accum(a, g * y * (1.0 - y))
        elif op == "exp":
            (a,) = node.parents
            accum(a, g * tape.values[nid])
        elif op == "log":
            (a,) = node.parents
            accum(a, g / tape.values[a])
        elif op == "sqrt":
            (a,) = node.parents
            accum(a, g * 0.5 / tape.values[nid])
        elif op == "maximum":
            (a,) = node.parents
            (c,) = node.ctx
            accum(a, g * (tape.values[a] > c))
        elif op == "sum":
            (a,) = node.parents
            axis, in_shape = node.ctx
            if axis is None:
                accum(a, np.broadcast_to(g, in_shape).copy())
            else:
                accum(a, np.broadcast_to(np.expand_dims(g, axis), in_shape).copy())
        else:  # pragma: no cover
            raise InvalidArgument(f"unknown op {op}")

    out = {}
    for name, nid in tape.inputs.items():
        g = adj[nid]
        out[name] = np.zeros_like(tape.values[nid]) if g is None else g
    return out


def eval_graph(inputs: dict[str, np.ndarray], program) -> tuple:
    """Evaluate ``program`` on fresh input nodes; returns (outputs, tape).

    ``program`` receives a dict of named :class:`Var` and returns a Var or a
    tuple of Vars built from the supported primitives.
    """
    tape = Tape()
    vars_ = {name: tape.input(name, val) for name, val in inputs.items()}
    outputs = program(vars_)
    return outputs, tape


def finite_difference_check(program, inputs: dict[str, np.ndarray], h: float = 1e-4) -> float:
    """Max relative error between reverse-mode and central-difference gradients.

    ``program`` must produce a scalar Var. The error for coordinate k is
    ``|fd_k - g_k| / (|g_k| + 1e-8)``, maximized over every coordinate of
    every input.
    """
    out, tape = eval_graph(inputs, program)
    grads = backward(tape, out)

    worst = 0.0
    for name, x in inputs.items():
        x = _as_array(x)
        flat = x.reshape(-1)
        for k in range(flat.size):
            for sign, store in ((+1.0, "hi"), (-1.0, "lo")):
                pert = flat.copy()
                pert[k] += sign * h
                trial = dict(inputs)
                trial[name] = pert.reshape(x.shape)
                val, _ = eval_graph(trial, program)
                if store == "hi":
                    f_hi = float(val.value)
                else:
                    f_lo = float(val.value)
            fd = (f_hi - f_lo) / (2.0 * h)
            g = grads[name].reshape(-1)[k]
            worst = max(worst, abs(fd - g) / (abs(g) + 1e-8))
    return worst
