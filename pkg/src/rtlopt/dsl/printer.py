"""Canonical pretty-printer for RTL-lite designs.

One statement per line, two-space indent, fully parenthesized binary
expressions. ``parse(print_design(parse(s)))`` is structurally identical to
``parse(s)``, which makes printed text a stable content-address key.
"""

from __future__ import annotations

from .ast import OP_SYMBOL, BINARY_OPS, Expr, RtlDesign


def print_expr(expr: Expr) -> str:
    k = expr.kind
    if k == "const":
        return f"{expr.width}'d{expr.value}"
    if k == "var":
        return expr.name
    if k == "not":
        return f"~{print_expr(expr.args[0])}"
    if k in ("shl", "shr"):
        return f"({print_expr(expr.args[0])} {OP_SYMBOL[k]} {expr.amount})"
    if k == "slice":
        arg = expr.args[0]
        inner = print_expr(arg)
        if arg.kind not in ("var", "slice"):
            inner = f"({inner})"
        return f"{inner}[{expr.msb}:{expr.lsb}]"
    if k == "mux":
        c, a, b = expr.args
        return f"({print_expr(c)} ? {print_expr(a)} : {print_expr(b)})"
    if k in BINARY_OPS:
        a, b = expr.args
        return f"({print_expr(a)} {OP_SYMBOL[k]} {print_expr(b)})"
    raise AssertionError(f"unhandled kind {k}")


def _decl_width(width: int) -> str:
    return f"[{width - 1}:0] " if width > 1 else ""


def print_design(design: RtlDesign) -> str:
    header_ports = ", ".join(
        f"{p.direction} {_decl_width(p.width)}{p.name}" for p in design.ports
    )
    lines = [f"module {design.name}({header_ports});"]
    for net in design.nets:
        lines.append(f"  wire {_decl_width(net.width)}{net.name};")
    for reg in design.registers:
        lines.append(f"  reg {_decl_width(reg.width)}{reg.name};")
    for assign in design.assigns:
        lines.append(f"  assign {assign.target} = {print_expr(assign.expr)};")
    if design.registers:
        lines.append("  always_ff begin")
        for reg in design.registers:
            lines.append(f"    {reg.name} <= {print_expr(reg.next)};")
        lines.append("  end")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"
