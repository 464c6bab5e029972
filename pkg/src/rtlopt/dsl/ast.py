"""Core data model for the RTL-lite subset.

A design is a flat module: typed ports, wire/reg declarations, continuous
assigns, and one implicit-clock block of nonblocking register updates.
Everything is immutable after elaboration so designs can be shared freely
across concurrent evaluators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

MAX_WIDTH = 64

# Expression node kinds.
UNARY_OPS = frozenset({"not"})
BINARY_OPS = frozenset({"and", "or", "xor", "add", "sub", "eq", "lt"})
SHIFT_OPS = frozenset({"shl", "shr"})
ALL_KINDS = frozenset({"const", "var", "slice", "mux"}) | UNARY_OPS | BINARY_OPS | SHIFT_OPS

# Operators that are associative and commutative; chains of these may be
# reassociated by the rewriter.
ASSOCIATIVE_OPS = frozenset({"and", "or", "xor", "add"})

OP_SYMBOL = {
    "and": "&",
    "or": "|",
    "xor": "^",
    "add": "+",
    "sub": "-",
    "eq": "==",
    "lt": "<",
    "shl": "<<",
    "shr": ">>",
}


class RtlError(Exception):
    """Base for all RTL-lite front-end errors; carries a source location."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{message} (line {line}, col {col})" if line else message)
        self.message = message
        self.line = line
        self.col = col


class RtlSyntaxError(RtlError):
    pass


class RtlSemanticError(RtlError):
    pass


@dataclass(frozen=True)
class Expr:
    """One node of an elaborated expression tree.

    ``width`` is the result width in bits; arithmetic is unsigned modulo
    2**width and binary operands always have equal widths (no implicit
    extension). ``loc`` is the (line, col) of the node's defining token.
    """

    kind: str
    width: int
    args: tuple["Expr", ...] = ()
    name: str | None = None       # var
    value: int | None = None      # const
    amount: int | None = None     # shl / shr
    msb: int | None = None        # slice
    lsb: int | None = None        # slice
    loc: tuple[int, int] = (0, 0)

    def key(self):
        """Structural identity, ignoring source locations."""
        return (
            self.kind, self.width, self.name, self.value,
            self.amount, self.msb, self.lsb,
            tuple(a.key() for a in self.args),
        )

    def node_count(self) -> int:
        return 1 + sum(a.node_count() for a in self.args)

    def walk(self):
        yield self
        for a in self.args:
            yield from a.walk()


@dataclass(frozen=True)
class Port:
    name: str
    direction: str  # "input" | "output"
    width: int


@dataclass(frozen=True)
class Net:
    name: str
    width: int


@dataclass(frozen=True)
class Register:
    name: str
    width: int
    next: Expr
    loc: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class Assign:
    target: str
    expr: Expr
    loc: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class RtlDesign:
    """An elaborated RTL-lite module.

    Invariants (enforced by the elaborator): every referenced identifier is
    declared; each net and register has exactly one driver; the assign graph
    is acyclic; all widths lie in [1, 64].
    """

    name: str
    source: str
    ports: tuple[Port, ...]
    nets: tuple[Net, ...]
    registers: tuple[Register, ...]
    assigns: tuple[Assign, ...]
    filename: str = "<memory>"

    # Derived lookups, built once in __post_init__.
    _widths: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        widths = {}
        for p in self.ports:
            widths[p.name] = p.width
        for n in self.nets:
            widths[n.name] = n.width
        for r in self.registers:
            widths[r.name] = r.width
        object.__setattr__(self, "_widths", widths)

    def width_of(self, name: str) -> int:
        return self._widths[name]

    @property
    def input_ports(self) -> tuple[Port, ...]:
        return tuple(p for p in self.ports if p.direction == "input")

    @property
    def output_ports(self) -> tuple[Port, ...]:
        return tuple(p for p in self.ports if p.direction == "output")

    def register_names(self) -> frozenset[str]:
        return frozenset(r.name for r in self.registers)

    def all_exprs(self):
        """Every top-level expression with its driving statement target."""
        for a in self.assigns:
            yield a.target, a.expr
        for r in self.registers:
            yield r.name, r.next

    def key(self):
        return (
            self.name,
            tuple(self.ports),
            tuple(self.nets),
            tuple((r.name, r.width, r.next.key()) for r in self.registers),
            tuple((a.target, a.expr.key()) for a in self.assigns),
        )

    def port_signature(self):
        return tuple((p.name, p.direction, p.width) for p in self.ports)


def reference_counts(design: RtlDesign) -> dict[str, int]:
    """Structural fanout: number of var references to each identifier."""
    counts: dict[str, int] = {}
    for _, expr in design.all_exprs():
        for node in expr.walk():
            if node.kind == "var":
                counts[node.name] = counts.get(node.name, 0) + 1
    return counts
