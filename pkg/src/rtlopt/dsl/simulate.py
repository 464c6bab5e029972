"""Cycle-accurate simulation of RTL-lite designs.

Two engines share the same semantics:

* :func:`simulate` — plain-Python reference engine over int values, one
  trace at a time. This is the replay oracle for equivalence
  counterexamples.
* :class:`CompiledDesign` — numpy batch engine evaluating many input
  sequences at once; the equivalence checker runs on this one.

Per frame: combinational logic is evaluated from the current register
values, outputs are sampled, then registers load their next-state values.
Registers start at all-zeros.
"""

from __future__ import annotations

import numpy as np

from .ast import Expr, RtlDesign, RtlError
from .parser import topo_order


def _mask(width: int) -> int:
    return (1 << width) - 1


def eval_expr(expr: Expr, env: dict[str, int]) -> int:
    k = expr.kind
    if k == "const":
        return expr.value
    if k == "var":
        return env[expr.name]
    if k == "not":
        return ~eval_expr(expr.args[0], env) & _mask(expr.width)
    if k == "and":
        return eval_expr(expr.args[0], env) & eval_expr(expr.args[1], env)
    if k == "or":
        return eval_expr(expr.args[0], env) | eval_expr(expr.args[1], env)
    if k == "xor":
        return eval_expr(expr.args[0], env) ^ eval_expr(expr.args[1], env)
    if k == "add":
        return (eval_expr(expr.args[0], env) + eval_expr(expr.args[1], env)) & _mask(expr.width)
    if k == "sub":
        return (eval_expr(expr.args[0], env) - eval_expr(expr.args[1], env)) & _mask(expr.width)
    if k == "eq":
        return int(eval_expr(expr.args[0], env) == eval_expr(expr.args[1], env))
    if k == "lt":
        return int(eval_expr(expr.args[0], env) < eval_expr(expr.args[1], env))
    if k == "shl":
        return (eval_expr(expr.args[0], env) << expr.amount) & _mask(expr.width)
    if k == "shr":
        return eval_expr(expr.args[0], env) >> expr.amount
    if k == "slice":
        return (eval_expr(expr.args[0], env) >> expr.lsb) & _mask(expr.width)
    if k == "mux":
        c, a, b = expr.args
        return eval_expr(a, env) if eval_expr(c, env) else eval_expr(b, env)
    raise AssertionError(f"unhandled kind {k}")


def simulate(design: RtlDesign, input_trace: list[dict[str, int]],
             frames: int) -> list[dict[str, int]]:
    """Run ``frames`` cycles and return a per-frame dict of output values."""
    if len(input_trace) != frames:
        raise RtlError(f"trace length {len(input_trace)} != frames {frames}")
    order = topo_order(design)
    inputs = design.input_ports
    outputs = design.output_ports
    regs = {r.name: 0 for r in design.registers}
    result = []
    for frame in range(frames):
        vector = input_trace[frame]
        env = dict(regs)
        for port in inputs:
            if port.name not in vector:
                raise RtlError(f"frame {frame}: missing value for input {port.name!r}")
            value = vector[port.name]
            if not (0 <= value <= _mask(port.width)):
                raise RtlError(
                    f"frame {frame}: value {value} does not fit "
                    f"{port.width}-bit input {port.name!r}")
            env[port.name] = value
        for assign in order:
            env[assign.target] = eval_expr(assign.expr, env)
        result.append({p.name: env[p.name] for p in outputs})
        regs = {r.name: eval_expr(r.next, env) for r in design.registers}
    return result


class CompiledDesign:
    """Batch evaluator: every signal is a uint64 vector across sequences."""

    def __init__(self, design: RtlDesign):
        self.design = design
        self.order = topo_order(design)
        self.inputs = design.input_ports
        self.outputs = design.output_ports

    def _eval(self, expr: Expr, env: dict[str, np.ndarray]) -> np.ndarray:
        k = expr.kind
        mask = np.uint64(_mask(expr.width))
        if k == "const":
            return np.uint64(expr.value)
        if k == "var":
            return env[expr.name]
        if k == "not":
            return ~self._eval(expr.args[0], env) & mask
        if k in ("and", "or", "xor", "add", "sub"):
            a = self._eval(expr.args[0], env)
            b = self._eval(expr.args[1], env)
            if k == "and":
                return a & b
            if k == "or":
                return a | b
            if k == "xor":
                return a ^ b
            if k == "add":
                return (a + b) & mask
            return (a - b) & mask
        if k in ("eq", "lt"):
            a = self._eval(expr.args[0], env)
            b = self._eval(expr.args[1], env)
            out = (a == b) if k == "eq" else (a < b)
            return out.astype(np.uint64) if isinstance(out, np.ndarray) else np.uint64(out)
        if k == "shl":
            return (self._eval(expr.args[0], env) << np.uint64(expr.amount)) & mask
        if k == "shr":
            return self._eval(expr.args[0], env) >> np.uint64(expr.amount)
        if k == "slice":
            return (self._eval(expr.args[0], env) >> np.uint64(expr.lsb)) & mask
        if k == "mux":
            c = self._eval(expr.args[0], env)
            a = self._eval(expr.args[1], env)
            b = self._eval(expr.args[2], env)
            return np.where(c != 0, a, b)
        raise AssertionError(f"unhandled kind {k}")

    def run(self, input_arrays: list[dict[str, np.ndarray]],
            frames: int) -> list[dict[str, np.ndarray]]:
        """Simulate a batch; ``input_arrays[frame][port]`` is a uint64 vector."""
        n = len(next(iter(input_arrays[0].values()))) if self.inputs else 1
        regs = {r.name: np.zeros(n, dtype=np.uint64) for r in self.design.registers}
        traces = []
        for frame in range(frames):
            env: dict[str, np.ndarray] = dict(regs)
            for port in self.inputs:
                env[port.name] = input_arrays[frame][port.name]
            for assign in self.order:
                env[assign.target] = np.broadcast_to(
                    self._eval(assign.expr, env), (n,)).astype(np.uint64, copy=False)
            traces.append({p.name: np.broadcast_to(env[p.name], (n,)) for p in self.outputs})
            regs = {
                r.name: np.broadcast_to(self._eval(r.next, env), (n,)).astype(
                    np.uint64, copy=False)
                for r in self.design.registers
            }
        return traces
