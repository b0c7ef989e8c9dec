"""Digraph algebra on circuits.

Fundamental loop and cutset matrices of a spanning tree, detection of
loops and cutsets made only of given device classes, constrained spanning
tree enumeration and sums of cotree MR-products.

Branch variables follow the associated reference direction: current flows
from ``tail`` to ``head`` and the branch voltage is the potential drop
``tail -> head``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .netlist import Circuit

CLASS_LETTER = {
    "V": "vsource",
    "M": "memristor",
    "C": "capacitor",
    "L": "inductor",
    "R": "resistor",
    "I": "isource",
}

# greedy preference for the default generating tree; gives a proper tree
# (all V and C, no L or I) whenever one exists
DEFAULT_TREE_PREFERENCE = ("vsource", "capacitor", "resistor", "memristor", "inductor", "isource")

FAMILIES = ("all", "proper", "lproper")
_FAMILY_ALIASES = {"l-proper": "lproper", "l_proper": "lproper"}


class TreeError(ValueError):
    pass


class _DSU:
    def __init__(self, items: Iterable):
        self.parent = {v: v for v in items}

    def find(self, v):
        p = self.parent
        while p[v] != v:
            p[v] = p[p[v]]
            v = p[v]
        return v

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def _n_components(nodes: Sequence, edges: Iterable[tuple]) -> int:
    dsu = _DSU(nodes)
    for a, b in edges:
        dsu.union(a, b)
    return len({dsu.find(v) for v in nodes})


# ---------------------------------------------------------------------------
# spanning trees and fundamental matrices


@dataclass(frozen=True)
class SpanningTree:
    branches: frozenset[str]

    def __iter__(self):
        return iter(self.branches)

    def __len__(self):
        return len(self.branches)


def is_spanning_tree(circuit: Circuit, ids: Iterable[str]) -> bool:
    ids = list(ids)
    if len(ids) != circuit.n_nodes - 1 or len(set(ids)) != len(ids):
        return False
    by_id = {b.id: b for b in circuit.branches}
    dsu = _DSU(circuit.nodes)
    for i in ids:
        if i not in by_id:
            return False
        b = by_id[i]
        if not dsu.union(b.tail, b.head):
            return False
    return True


def default_tree(circuit: Circuit) -> SpanningTree:
    """Greedy spanning tree by class preference, then netlist order."""
    rank = {k: i for i, k in enumerate(DEFAULT_TREE_PREFERENCE)}
    order = sorted(range(circuit.n_branches), key=lambda i: (rank[circuit.branches[i].kind], i))
    dsu = _DSU(circuit.nodes)
    chosen = []
    for i in order:
        b = circuit.branches[i]
        if dsu.union(b.tail, b.head):
            chosen.append(b.id)
    return SpanningTree(frozenset(chosen))


@dataclass
class ReducedMatrices:
    B: np.ndarray  # (m - n + 1) x m, row i = loop of i-th cotree branch
    Q: np.ndarray  # (n - 1) x m, row j = cutset of j-th tree branch
    generating_tree: SpanningTree
    cotree_order: list[str]
    tree_order: list[str]


def _tree_adjacency(circuit: Circuit, tree: SpanningTree):
    adj: dict[str, list[tuple[str, int]]] = {v: [] for v in circuit.nodes}
    for i, b in enumerate(circuit.branches):
        if b.id in tree.branches:
            adj[b.tail].append((b.head, i))
            adj[b.head].append((b.tail, i))
    return adj


def _tree_path(circuit: Circuit, adj, start: str, goal: str) -> list[tuple[int, int]]:
    """Branches on the tree path start -> goal with traversal sign."""
    prev: dict[str, tuple[str, int] | None] = {start: None}
    stack = [start]
    while stack:
        v = stack.pop()
        if v == goal:
            break
        for w, i in adj[v]:
            if w not in prev:
                prev[w] = (v, i)
                stack.append(w)
    path = []
    v = goal
    while prev[v] is not None:
        u, i = prev[v]
        b = circuit.branches[i]
        path.append((i, 1 if (b.tail == u and b.head == v) else -1))
        v = u
    path.reverse()
    return path


def fundamental_matrices(circuit: Circuit, tree: SpanningTree | None = None) -> ReducedMatrices:
    """Fundamental loop matrix ``B`` and cutset matrix ``Q`` of ``tree``.

    Rows of ``B`` follow the cotree branches in netlist order and are
    oriented with their branch; likewise for ``Q`` and tree branches.
    """
    if tree is None:
        tree = default_tree(circuit)
    if not is_spanning_tree(circuit, tree.branches):
        raise TreeError("not a spanning tree of the circuit")
    m = circuit.n_branches
    tree_pos = [i for i, b in enumerate(circuit.branches) if b.id in tree.branches]
    cotree_pos = [i for i, b in enumerate(circuit.branches) if b.id not in tree.branches]
    adj = _tree_adjacency(circuit, tree)

    B = np.zeros((len(cotree_pos), m))
    for row, c in enumerate(cotree_pos):
        b = circuit.branches[c]
        B[row, c] = 1.0
        # loop: chord tail -> head, then back through the tree head -> tail
        for i, sign in _tree_path(circuit, adj, b.head, b.tail):
            B[row, i] = sign

    Q = np.zeros((len(tree_pos), m))
    for row, t in enumerate(tree_pos):
        tb = circuit.branches[t]
        # side of the tree containing the tail once t is removed
        side = {tb.tail}
        stack = [tb.tail]
        while stack:
            v = stack.pop()
            for w, i in adj[v]:
                if i != t and w not in side:
                    side.add(w)
                    stack.append(w)
        for i, b in enumerate(circuit.branches):
            a_in, h_in = b.tail in side, b.head in side
            if a_in and not h_in:
                Q[row, i] = 1.0
            elif h_in and not a_in:
                Q[row, i] = -1.0
    return ReducedMatrices(
        B,
        Q,
        tree,
        [circuit.branches[i].id for i in cotree_pos],
        [circuit.branches[i].id for i in tree_pos],
    )


# ---------------------------------------------------------------------------
# device-class loops and cutsets


def _classes(spec: str) -> set[str]:
    return {CLASS_LETTER[ch] for ch in spec}


def _edges_of(circuit: Circuit, positions: Iterable[int]):
    return [(circuit.branches[i].tail, circuit.branches[i].head) for i in positions]


def find_loop(circuit: Circuit, classes: str) -> list[str] | None:
    """A loop made only of branches from ``classes`` (letters), or None."""
    kinds = _classes(classes)
    allowed = [i for i, b in enumerate(circuit.branches) if b.kind in kinds]
    dsu = _DSU(circuit.nodes)
    forest: list[int] = []
    for i in allowed:
        b = circuit.branches[i]
        if not dsu.union(b.tail, b.head):
            # closing branch: loop = i + forest path head -> tail
            adj: dict[str, list[tuple[str, int]]] = {v: [] for v in circuit.nodes}
            for j in forest:
                bj = circuit.branches[j]
                adj[bj.tail].append((bj.head, j))
                adj[bj.head].append((bj.tail, j))
            path = _tree_path(circuit, adj, b.head, b.tail)
            return [b.id] + [circuit.branches[j].id for j, _ in path]
        forest.append(i)
    return None


def find_cutset(circuit: Circuit, classes: str) -> list[str] | None:
    """A cutset made only of branches from ``classes`` (letters), or None.

    Such a cutset exists iff deleting every branch of these classes
    disconnects the graph. The witness is a fundamental cutset of the
    quotient graph, which is minimal.
    """
    kinds = _classes(classes)
    others = [i for i, b in enumerate(circuit.branches) if b.kind not in kinds]
    dsu = _DSU(circuit.nodes)
    for a, b in _edges_of(circuit, others):
        dsu.union(a, b)
    comps = {dsu.find(v) for v in circuit.nodes}
    if len(comps) <= 1:
        return None
    inside = [i for i, b in enumerate(circuit.branches) if b.kind in kinds]
    # spanning tree of the quotient graph over the K-branches
    qdsu = _DSU(comps)
    qtree = []
    for i in inside:
        b = circuit.branches[i]
        if qdsu.union(dsu.find(b.tail), dsu.find(b.head)):
            qtree.append(i)
    t = qtree[0]
    rest = _DSU(comps)
    for i in qtree[1:]:
        b = circuit.branches[i]
        rest.union(dsu.find(b.tail), dsu.find(b.head))
    side = rest.find(dsu.find(circuit.branches[t].tail))
    cut = []
    for i in inside:
        b = circuit.branches[i]
        st = rest.find(dsu.find(b.tail)) == side
        sh = rest.find(dsu.find(b.head)) == side
        if st != sh:
            cut.append(b.id)
    return cut


def simple_cycles(circuit: Circuit, classes: str) -> list[list[str]]:
    """All simple cycles (as branch-id lists) in the subgraph of ``classes``."""
    kinds = _classes(classes)
    allowed = [i for i, b in enumerate(circuit.branches) if b.kind in kinds]
    adj: dict[str, list[tuple[str, int]]] = {}
    for i in allowed:
        b = circuit.branches[i]
        adj.setdefault(b.tail, []).append((b.head, i))
        adj.setdefault(b.head, []).append((b.tail, i))
    cycles: list[list[int]] = []
    # each cycle is found from its smallest branch index, walking from its tail
    for first in allowed:
        b0 = circuit.branches[first]
        start, goal = b0.head, b0.tail
        path = [first]
        visited = {start}

        def walk(v):
            for w, i in adj.get(v, ()):
                if i <= first or i in path:
                    continue
                if w == goal:
                    cycles.append(path + [i])
                    continue
                if w in visited:
                    continue
                visited.add(w)
                path.append(i)
                walk(w)
                path.pop()
                visited.discard(w)

        if start == goal:
            continue
        walk(start)
    # each cycle is found twice (once per direction) except 2-cycles
    seen = set()
    out = []
    for cyc in cycles:
        key = frozenset(cyc)
        if key not in seen:
            seen.add(key)
            out.append([circuit.branches[i].id for i in sorted(cyc)])
    return out


def is_loop(circuit: Circuit, ids: Sequence[str]) -> bool:
    """True if the branches form a single simple cycle."""
    bs = [circuit.branches[circuit.position(i)] for i in ids]
    if not bs or len(set(ids)) != len(ids):
        return False
    degree: dict[str, int] = {}
    for b in bs:
        degree[b.tail] = degree.get(b.tail, 0) + 1
        degree[b.head] = degree.get(b.head, 0) + 1
    if any(d != 2 for d in degree.values()):
        return False
    return _n_components(list(degree), [(b.tail, b.head) for b in bs]) == 1


def is_cutset(circuit: Circuit, ids: Sequence[str]) -> bool:
    """True if deleting ``ids`` disconnects the graph and no proper subset does."""
    ids = set(ids)
    if not ids:
        return False

    def comps(removed):
        keep = [(b.tail, b.head) for b in circuit.branches if b.id not in removed]
        return _n_components(circuit.nodes, keep)

    if comps(ids) <= 1:
        return False
    return all(comps(ids - {i}) <= 1 for i in ids)


@dataclass
class ConfigReport:
    vc_loop: list[str] | None
    vmc_loop: list[str] | None
    vl_loop: list[str] | None
    il_cutset: list[str] | None
    ilc_cutset: list[str] | None
    ic_cutset: list[str] | None
    vml_loops: list[list[str]]
    memristors: list[str] = field(default_factory=list)
    inductors: list[str] = field(default_factory=list)

    @property
    def n_vml_loops(self) -> int:
        return len(self.vml_loops)

    @property
    def unique_vml_loop_with_memristor_and_inductor(self) -> bool:
        if self.n_vml_loops != 1:
            return False
        loop = set(self.vml_loops[0])
        return bool(loop & set(self.memristors)) and bool(loop & set(self.inductors))

    def as_dict(self) -> dict:
        return {
            "vc_loop": self.vc_loop,
            "vmc_loop": self.vmc_loop,
            "vl_loop": self.vl_loop,
            "il_cutset": self.il_cutset,
            "ilc_cutset": self.ilc_cutset,
            "ic_cutset": self.ic_cutset,
            "vml_loops": self.vml_loops[:2],
            "n_vml_loops": self.n_vml_loops,
            "unique_vml_loop_with_memristor_and_inductor": (
                self.unique_vml_loop_with_memristor_and_inductor
            ),
        }


def check_configurations(circuit: Circuit) -> ConfigReport:
    return ConfigReport(
        vc_loop=find_loop(circuit, "VC"),
        vmc_loop=find_loop(circuit, "VMC"),
        vl_loop=find_loop(circuit, "VL"),
        il_cutset=find_cutset(circuit, "IL"),
        ilc_cutset=find_cutset(circuit, "ILC"),
        ic_cutset=find_cutset(circuit, "IC"),
        vml_loops=simple_cycles(circuit, "VML"),
        memristors=[b.id for b in circuit.of_kind("memristor")],
        inductors=[b.id for b in circuit.of_kind("inductor")],
    )


# ---------------------------------------------------------------------------
# tree families


def normalize_family(family: str) -> str:
    family = _FAMILY_ALIASES.get(family, family)
    if family not in FAMILIES:
        raise ValueError(f"unknown tree family {family!r}")
    return family


def family_constraints(family: str) -> tuple[set[str], set[str]]:
    """(required kinds, forbidden kinds) of a tree family."""
    family = normalize_family(family)
    if family == "proper":
        return {"vsource", "capacitor"}, {"isource", "inductor"}
    if family == "lproper":
        return {"vsource", "inductor"}, {"isource", "capacitor"}
    return set(), set()


@dataclass
class TreeFamily:
    family: str
    trees: list[SpanningTree]
    order: list[str]  # netlist branch order, used to list tree branches
    products: list[float] | None = None
    explanation: str = ""

    def __len__(self):
        return len(self.trees)

    def tree_ids(self, k: int) -> list[str]:
        return [i for i in self.order if i in self.trees[k].branches]

    def cotree_ids(self, k: int) -> list[str]:
        return [i for i in self.order if i not in self.trees[k].branches]

    def as_dict(self) -> dict:
        out = {
            "family": self.family,
            "count": len(self.trees),
            "trees": [
                {
                    "branches": self.tree_ids(k),
                    "cotree_product": None if self.products is None else self.products[k],
                }
                for k in range(len(self.trees))
            ],
        }
        if self.products is not None:
            out["sum"] = float(sum(self.products))
        if self.explanation:
            out["explanation"] = self.explanation
        return out


def _enumerate(nodes, edges: list[tuple[int, str, str]]) -> list[tuple[int, ...]]:
    """All spanning trees of a multigraph given as (key, tail, head) edges.

    Include/exclude backtracking: an edge is included when it joins two
    components, excluded only when the remaining edges can still span.
    """
    target = len(nodes) - 1
    out: list[tuple[int, ...]] = []
    chosen: list[int] = []

    def spans(dsu_parent, start):
        d = _DSU(nodes)
        d.parent = dict(dsu_parent)
        for _, a, b in edges[start:]:
            d.union(a, b)
        return len({d.find(v) for v in nodes}) == 1

    def rec(k, parent):
        if len(chosen) == target:
            out.append(tuple(chosen))
            return
        if k == len(edges) or len(edges) - k < target - len(chosen):
            return
        key, a, b = edges[k]
        d = _DSU(nodes)
        d.parent = dict(parent)
        if d.union(a, b):
            chosen.append(key)
            rec(k + 1, d.parent)
            chosen.pop()
        if spans(parent, k + 1):
            rec(k + 1, parent)

    if target == 0:
        return [()]
    if spans({v: v for v in nodes}, 0):
        rec(0, {v: v for v in nodes})
    return out


def enumerate_trees(circuit: Circuit, family: str = "all") -> TreeFamily:
    """Duplicate-free enumeration of spanning trees in a family.

    Required branches are contracted first and forbidden ones deleted
    first; the free branches are then enumerated on the contracted graph.
    Trees are listed in lexicographic order of their netlist positions.
    """
    family = normalize_family(family)
    required_kinds, forbidden_kinds = family_constraints(family)
    order = [b.id for b in circuit.branches]
    required = [i for i, b in enumerate(circuit.branches) if b.kind in required_kinds]
    free = [
        i
        for i, b in enumerate(circuit.branches)
        if b.kind not in required_kinds and b.kind not in forbidden_kinds
    ]
    dsu = _DSU(circuit.nodes)
    for i in required:
        b = circuit.branches[i]
        if not dsu.union(b.tail, b.head):
            return TreeFamily(
                family, [], order, explanation=f"required branches form a loop through {b.id}"
            )
    supernodes = sorted({dsu.find(v) for v in circuit.nodes}, key=circuit.nodes.index)
    edges = []
    for i in free:
        b = circuit.branches[i]
        a, h = dsu.find(b.tail), dsu.find(b.head)
        if a != h:
            edges.append((i, a, h))
    found = _enumerate(supernodes, edges)
    if not found:
        return TreeFamily(
            family, [], order, explanation="forbidden branches form a cutset; no tree qualifies"
        )
    trees = sorted(tuple(sorted(required + list(t))) for t in found)
    return TreeFamily(
        family,
        [SpanningTree(frozenset(circuit.branches[i].id for i in t)) for t in trees],
        order,
    )


def branch_resistances(
    circuit: Circuit, q_m: float | Mapping[str, float] = 0.0, i_r: Mapping[str, float] | None = None
) -> dict[str, float]:
    """Incremental resistance / memristance of every R and M branch at a point."""
    i_r = i_r or {}
    values = {}
    for b in circuit.branches:
        if b.kind == "memristor":
            q = q_m[b.id] if isinstance(q_m, Mapping) else q_m
            values[b.id] = b.characteristic(q)
        elif b.kind == "resistor":
            values[b.id] = b.characteristic(i_r.get(b.id, 0.0))
    return values


def mr_products(circuit: Circuit, family: TreeFamily, values: Mapping[str, float]) -> list[float]:
    products = []
    for tree in family.trees:
        prod = 1.0
        for b in circuit.branches:
            if b.id not in tree.branches and b.id in values:
                prod *= values[b.id]
        products.append(prod)
    return products


def mr_product_sum(
    circuit: Circuit,
    family: TreeFamily,
    q_m: float | Mapping[str, float] = 0.0,
    i_r: Mapping[str, float] | None = None,
) -> float:
    """Sum over trees of the product of cotree resistances and memristances."""
    values = branch_resistances(circuit, q_m, i_r)
    family.products = mr_products(circuit, family, values)
    return float(sum(family.products))
