"""Netlist front end: polynomial device characteristics and the Circuit model.

A netlist holds one branch per line::

    <KIND> <id> <tail> <head> <coeff...>

with KIND one of ``M C L R V I``. Coefficients are listed low degree
first. ``#`` starts a comment. For a memristor the coefficients give the
memristance ``M(q)``; for a resistor they give the incremental resistance
``R(i)``; capacitors, inductors and sources take a single constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

#: device classes in the block order used by the loop and cutset matrices
CLASS_ORDER = ("memristor", "capacitor", "inductor", "resistor", "vsource", "isource")

KIND_LETTERS = {
    "M": "memristor",
    "C": "capacitor",
    "L": "inductor",
    "R": "resistor",
    "V": "vsource",
    "I": "isource",
}
LETTER_OF = {v: k for k, v in KIND_LETTERS.items()}

# kinds whose characteristic must be a single constant
_CONSTANT_KINDS = {"capacitor", "inductor", "vsource", "isource"}


class NetlistError(ValueError):
    """Raised for malformed or invalid netlists."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# ---------------------------------------------------------------------------
# polynomials


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial, coefficients low degree first."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        if len(self.coeffs) == 0:
            raise ValueError("empty coefficient list; the zero polynomial is [0]")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x: float) -> float:
        return eval_poly(self, x)

    def derivative(self) -> "Polynomial":
        return deriv_poly(self)

    def antiderivative(self) -> "Polynomial":
        """Antiderivative vanishing at zero."""
        return Polynomial((0.0,) + tuple(c / (k + 1) for k, c in enumerate(self.coeffs)))


def eval_poly(p: Polynomial | Sequence[float], x: float) -> float:
    """Horner evaluation."""
    coeffs = p.coeffs if isinstance(p, Polynomial) else p
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def deriv_poly(p: Polynomial | Sequence[float]) -> Polynomial:
    coeffs = p.coeffs if isinstance(p, Polynomial) else tuple(p)
    if len(coeffs) <= 1:
        return Polynomial((0.0,))
    return Polynomial(tuple(k * c for k, c in enumerate(coeffs) if k > 0))


# ---------------------------------------------------------------------------
# circuit


@dataclass(frozen=True)
class Branch:
    id: str
    kind: str
    tail: str
    head: str
    characteristic: Polynomial

    def __post_init__(self):
        if self.kind not in CLASS_ORDER:
            raise ValueError(f"unknown device kind {self.kind!r}")
        if self.tail == self.head:
            raise ValueError(f"branch {self.id!r} is a self-loop")
        if self.kind in _CONSTANT_KINDS and self.characteristic.degree != 0:
            raise ValueError(f"branch {self.id!r}: {self.kind} takes a single constant")

    @property
    def value(self) -> float:
        """Constant part of the characteristic (C, L, source value, R(0), M(0))."""
        return self.characteristic.coeffs[0]


@dataclass(frozen=True)
class Circuit:
    """Connected directed multigraph of device branches."""

    branches: tuple[Branch, ...]
    nodes: tuple[str, ...] = field(default=())
    class_index: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        branches = tuple(self.branches)
        object.__setattr__(self, "branches", branches)
        if not branches:
            raise NetlistError("empty circuit")
        ids = [b.id for b in branches]
        dup = {i for i in ids if ids.count(i) > 1}
        if dup:
            raise NetlistError(f"duplicate branch id {sorted(dup)[0]!r}")
        nodes: list[str] = []
        for b in branches:
            for v in (b.tail, b.head):
                if v not in nodes:
                    nodes.append(v)
        object.__setattr__(self, "nodes", tuple(nodes))
        object.__setattr__(
            self,
            "class_index",
            {k: [i for i, b in enumerate(branches) if b.kind == k] for k in CLASS_ORDER},
        )
        if not _connected(nodes, [(b.tail, b.head) for b in branches]):
            raise NetlistError("circuit graph is not connected")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    def of_kind(self, kind: str) -> list[Branch]:
        return [self.branches[i] for i in self.class_index[kind]]

    def position(self, branch_id: str) -> int:
        for i, b in enumerate(self.branches):
            if b.id == branch_id:
                return i
        raise KeyError(branch_id)

    def class_ordered_positions(self) -> list[int]:
        """Branch positions sorted into (m, c, l, r, u, j) blocks."""
        return [i for k in CLASS_ORDER for i in self.class_index[k]]

    def with_characteristic(self, branch_id: str, coeffs: Sequence[float]) -> "Circuit":
        """Copy of the circuit with one branch characteristic replaced."""
        new = []
        for b in self.branches:
            if b.id == branch_id:
                b = Branch(b.id, b.kind, b.tail, b.head, Polynomial(tuple(coeffs)))
            new.append(b)
        return Circuit(tuple(new))

    def summary(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "branches": [
                {
                    "id": b.id,
                    "kind": b.kind,
                    "tail": b.tail,
                    "head": b.head,
                    "coeffs": list(b.characteristic.coeffs),
                }
                for b in self.branches
            ],
        }


def _connected(nodes, edges) -> bool:
    parent = {v: v for v in nodes}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for a, b in edges:
        parent[find(a)] = find(b)
    return len({find(v) for v in nodes}) <= 1


# ---------------------------------------------------------------------------
# parsing / formatting


def parse_netlist(text: str) -> Circuit:
    branches: list[Branch] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        letter = tokens[0].upper()
        if letter not in KIND_LETTERS:
            raise NetlistError(f"unknown device kind {tokens[0]!r}", lineno)
        if len(tokens) < 4:
            raise NetlistError("expected '<KIND> <id> <tail> <head> <coeff...>'", lineno)
        kind = KIND_LETTERS[letter]
        bid, tail, head = tokens[1], tokens[2], tokens[3]
        if len(tokens) == 4:
            raise NetlistError(f"branch {bid!r} has no characteristic", lineno)
        try:
            coeffs = tuple(float(t) for t in tokens[4:])
        except ValueError as exc:
            raise NetlistError(f"bad coefficient: {exc}", lineno) from None
        if bid in seen:
            raise NetlistError(f"duplicate branch id {bid!r}", lineno)
        if tail == head:
            raise NetlistError(f"branch {bid!r} is a self-loop", lineno)
        if kind in _CONSTANT_KINDS and len(coeffs) != 1:
            raise NetlistError(f"{kind} {bid!r} takes exactly one constant", lineno)
        seen.add(bid)
        branches.append(Branch(bid, kind, tail, head, Polynomial(coeffs)))
    return Circuit(tuple(branches))


def format_netlist(circuit: Circuit) -> str:
    """Inverse of :func:`parse_netlist` (comments are not preserved)."""
    lines = []
    for b in circuit.branches:
        coeffs = " ".join(repr(c) for c in b.characteristic.coeffs)
        lines.append(f"{LETTER_OF[b.kind]} {b.id} {b.tail} {b.head} {coeffs}")
    return "\n".join(lines) + "\n"


def load_netlist(path: str | Path) -> Circuit:
    """Read a netlist from ``path``; bare names fall back to the bundled examples."""
    p = Path(path)
    if not p.exists():
        bundled = bundled_path(p.name)
        if bundled is None:
            raise FileNotFoundError(f"netlist not found: {path}")
        p = bundled
    return parse_netlist(p.read_text(encoding="utf-8"))


def bundled_path(name: str) -> Path | None:
    candidate = resources.files("memtbwp") / "data" / name
    path = Path(str(candidate))
    return path if path.exists() else None


def bundled_names() -> list[str]:
    root = Path(str(resources.files("memtbwp") / "data"))
    return sorted(p.name for p in root.iterdir() if p.suffix in (".net", ".ode"))
