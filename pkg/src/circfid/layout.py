"""Coupling maps, interaction graphs, layout enumeration and ranking."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

from .circuit import Circuit, GateKind
from .errors import InputFormatError
from .transpile import Layout, remap


@dataclass(frozen=True)
class CouplingMap:
    n_qubits: int
    edges: frozenset
    name: str = ""

    def __post_init__(self):
        edges = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b or not (0 <= a < self.n_qubits and 0 <= b < self.n_qubits):
                raise InputFormatError(f"bad coupling edge ({a}, {b}) for {self.n_qubits} qubits")
            edges.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(edges))

    def neighbors(self, q: int) -> list[int]:
        return sorted({b for a, b in self.edges if a == q} | {a for a, b in self.edges if b == q})

    def degree(self, q: int) -> int:
        return len(self.neighbors(q))

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def to_dict(self) -> dict:
        return {"name": self.name, "n_qubits": self.n_qubits, "edges": [list(e) for e in self.sorted_edges()]}

    @classmethod
    def from_dict(cls, data: dict) -> "CouplingMap":
        try:
            return cls(int(data["n_qubits"]), frozenset(tuple(e) for e in data["edges"]), data.get("name", ""))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputFormatError(f"malformed coupling map: {exc}") from None

    @classmethod
    def load(cls, path) -> "CouplingMap":
        return cls.from_dict(json.loads(Path(path).read_text()))


def builtin_coupling_map(name: str) -> CouplingMap:
    """Shipped maps: ``nairobi`` (7 qubits) and ``montreal`` (27-qubit heavy hex)."""
    try:
        text = resources.files("circfid.data").joinpath(f"{name}_map.json").read_text()
    except FileNotFoundError:
        raise InputFormatError(f"no built-in coupling map named {name!r}") from None
    return CouplingMap.from_dict(json.loads(text))


@dataclass(frozen=True)
class InteractionGraph:
    vertices: tuple
    edges: frozenset

    def degree(self, v: int) -> int:
        return sum(v in e for e in self.edges)

    def neighbors(self, v: int) -> list[int]:
        return sorted({b for a, b in self.edges if a == v} | {a for a, b in self.edges if b == v})


def interaction_graph(c: Circuit) -> InteractionGraph:
    vertices = sorted({q for gt in c.gates if gt.kind is not GateKind.BARRIER for q in gt.qubits})
    edges = {tuple(sorted(gt.qubits)) for gt in c.gates if len(gt.qubits) == 2 and gt.kind is not GateKind.BARRIER}
    return InteractionGraph(tuple(vertices), frozenset(edges))


def _search_order(graph: InteractionGraph) -> list[int]:
    """Most constrained first: start at the highest degree vertex, then prefer vertices adjacent to placed ones."""
    remaining = set(graph.vertices)
    order = []
    while remaining:
        placed = set(order)
        best = max(
            remaining,
            key=lambda v: (sum(u in placed for u in graph.neighbors(v)), graph.degree(v), -v),
        )
        order.append(best)
        remaining.remove(best)
    return order


def enumerate_layouts(graph: InteractionGraph, cm: CouplingMap) -> list[Layout]:
    """Every injective placement that puts each interaction edge on a coupling edge.

    Backtracking with degree pruning, candidates drawn from the neighbourhood of
    an already placed neighbour when one exists. Sorted lexicographically by
    the physical images of the vertices in ascending logical order.
    """
    if len(graph.vertices) > cm.n_qubits:
        return []
    order = _search_order(graph)
    nbrs = {v: graph.neighbors(v) for v in graph.vertices}
    deg = {v: len(nbrs[v]) for v in graph.vertices}
    phys_nbrs = {q: set(cm.neighbors(q)) for q in range(cm.n_qubits)}
    found = []
    assign: dict[int, int] = {}
    used: set[int] = set()

    def extend(k: int):
        if k == len(order):
            found.append(tuple(assign[v] for v in graph.vertices))
            return
        v = order[k]
        placed_nbrs = [u for u in nbrs[v] if u in assign]
        if placed_nbrs:
            candidates = set(phys_nbrs[assign[placed_nbrs[0]]])
            for u in placed_nbrs[1:]:
                candidates &= phys_nbrs[assign[u]]
        else:
            candidates = set(range(cm.n_qubits))
        for p in sorted(candidates - used):
            if len(phys_nbrs[p]) < deg[v]:
                continue
            assign[v] = p
            used.add(p)
            extend(k + 1)
            used.discard(p)
            del assign[v]

    extend(0)
    found.sort()
    return [Layout(dict(zip(graph.vertices, image))) for image in found]


def top_fraction_size(n_layouts: int, fraction: float = 0.1) -> int:
    """``fraction * n_layouts`` rounded half up, at least 1 when any layout exists (56 -> 6, 74 -> 7, 2728 -> 273)."""
    if n_layouts <= 0:
        return 0
    return max(1, math.floor(round(fraction * n_layouts, 9) + 0.5))


def rank_layouts(c: Circuit, cm: CouplingMap, scorer: Callable[[Sequence[Circuit]], Sequence[float]]):
    """``[(layout, score), ...]`` best first; equal scores keep enumeration order.

    ``scorer`` receives the list of remapped circuits and returns one score per
    circuit (a fitted pipeline's ``predict`` works as is).
    """
    layouts = enumerate_layouts(interaction_graph(c), cm)
    if not layouts:
        raise InputFormatError("circuit does not embed in the coupling map; routing is not supported")
    circuits = [remap(c, layout, cm.n_qubits) for layout in layouts]
    scores = [float(s) for s in scorer(circuits)]
    order = sorted(range(len(layouts)), key=lambda i: -scores[i])
    return [(layouts[i], scores[i]) for i in order]
