"""Directed acyclic graph substrate: roles, connectivity, topological order,
and the layered/skip classification of networks.

Vertices are opaque string identifiers. Declaration order is significant:
every query that could be order-ambiguous (topological ties, layer listings)
resolves ties by declaration order so downstream output is reproducible.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import (CycleDetected, DanglingEdge, DuplicateEdge, NotConnected,
                     SelfLoop)

Edge = tuple[str, str]


@dataclass(frozen=True)
class RolePartition:
    inputs: tuple[str, ...]
    hiddens: tuple[str, ...]
    outputs: tuple[str, ...]


@dataclass(frozen=True)
class Layering:
    """Ordered layers M_0..M_{k+1}: first the inputs, last the outputs."""

    layers: tuple[tuple[str, ...], ...]


@dataclass(frozen=True)
class Dag:
    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]
    _index: dict = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        idx = {v: i for i, v in enumerate(self.vertices)}
        if len(idx) != len(self.vertices):
            raise DuplicateEdge("duplicate vertex declaration")
        seen: set[Edge] = set()
        succ: dict[str, list[str]] = {v: [] for v in self.vertices}
        pred: dict[str, list[str]] = {v: [] for v in self.vertices}
        for tail, head in self.edges:
            if tail == head:
                raise SelfLoop(f"self-loop on {tail!r}")
            if tail not in idx or head not in idx:
                raise DanglingEdge(f"edge {tail!r}->{head!r} references undeclared vertex")
            if (tail, head) in seen:
                raise DuplicateEdge(f"duplicate edge {tail!r}->{head!r}")
            seen.add((tail, head))
            succ[tail].append(head)
            pred[head].append(tail)
        object.__setattr__(self, "_index", {"pos": idx, "succ": succ, "pred": pred})
        order = topo_order(self)  # raises CycleDetected
        object.__setattr__(self, "_index", {**self._index, "topo": order})

    def successors(self, v: str) -> list[str]:
        return list(self._index["succ"][v])

    def predecessors(self, v: str) -> list[str]:
        return list(self._index["pred"][v])

    def position(self, v: str) -> int:
        return self._index["pos"][v]


def build_dag(vertices: Iterable[str], edges: Iterable[Edge]) -> Dag:
    """Validate and build a DAG; raises SelfLoop / DanglingEdge / DuplicateEdge /
    CycleDetected."""
    return Dag(tuple(vertices), tuple(tuple(e) for e in edges))


def topo_order(g: Dag) -> list[str]:
    """Kahn's algorithm with declaration-order tie-breaking (deterministic)."""
    cached = g._index.get("topo")
    if cached is not None:
        return list(cached)
    pos = g._index["pos"]
    indeg = {v: len(g._index["pred"][v]) for v in g.vertices}
    ready = sorted((v for v in g.vertices if indeg[v] == 0), key=pos.__getitem__)
    out: list[str] = []
    heap = [pos[v] for v in ready]
    heapq.heapify(heap)
    inv = {i: v for v, i in pos.items()}
    while heap:
        v = inv[heapq.heappop(heap)]
        out.append(v)
        for w in g._index["succ"][v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(heap, pos[w])
    if len(out) != len(g.vertices):
        raise CycleDetected("graph contains a directed cycle")
    return out


def roles(g: Dag) -> RolePartition:
    """Partition vertices into inputs (no predecessors), outputs (no successors
    but some predecessor), and hiddens. An isolated vertex counts as an input."""
    inputs, hiddens, outputs = [], [], []
    for v in g.vertices:
        has_in = bool(g._index["pred"][v])
        has_out = bool(g._index["succ"][v])
        if not has_in:
            inputs.append(v)
        elif not has_out:
            outputs.append(v)
        else:
            hiddens.append(v)
    return RolePartition(tuple(inputs), tuple(hiddens), tuple(outputs))


def is_connected(g: Dag) -> bool:
    """Connectivity of the underlying undirected graph."""
    if not g.vertices:
        return True
    seen = {g.vertices[0]}
    stack = [g.vertices[0]]
    while stack:
        v = stack.pop()
        for w in g._index["succ"][v] + g._index["pred"][v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(g.vertices)


def longest_path_levels(g: Dag) -> dict[str, int]:
    """Level of each vertex = longest path length from the input set."""
    levels: dict[str, int] = {}
    for v in topo_order(g):
        preds = g._index["pred"][v]
        levels[v] = 1 + max(levels[p] for p in preds) if preds else 0
    return levels


def classify_layering(g: Dag) -> Layering | None:
    """Return the unique layering when the network is layered, else None (skip).

    A layering must place inputs in the first layer, outputs in the last, and
    route every edge between consecutive layers. When one exists, each
    vertex's layer is forced to be its longest-path distance from the inputs,
    so it suffices to build that labeling and verify the conditions.
    """
    if not is_connected(g):
        raise NotConnected("layering classification requires a connected graph")
    parts = roles(g)
    if not parts.outputs:
        raise NotConnected("layering classification requires at least one output")
    levels = longest_path_levels(g)
    top = max(levels.values())
    for tail, head in g.edges:
        if levels[head] != levels[tail] + 1:
            return None
    for v in parts.outputs:
        if levels[v] != top:
            return None
    # Inputs are exactly level 0 and non-outputs never reach the top level by
    # construction of the longest-path labeling; collect layers in order.
    layers: list[list[str]] = [[] for _ in range(top + 1)]
    for v in g.vertices:
        layers[levels[v]].append(v)
    return Layering(tuple(tuple(layer) for layer in layers))


def verify_layering(g: Dag, layering: Layering) -> bool:
    """Independent check of the three layering conditions; used by tests."""
    layers = [set(layer) for layer in layering.layers]
    parts = roles(g)
    if len(layers) < 2:
        return False
    if layers[0] != set(parts.inputs) or layers[-1] != set(parts.outputs):
        return False
    allv = set()
    for layer in layers:
        if layer & allv:
            return False
        allv |= layer
    if allv != set(g.vertices):
        return False
    level = {v: i for i, layer in enumerate(layers) for v in layer}
    for tail, head in g.edges:
        if level[head] != level[tail] + 1:
            return False
    return True


def subgraph(g: Dag, keep: Sequence[str]) -> Dag:
    """Induced subgraph on `keep`, preserving declaration order."""
    keep_set = set(keep)
    verts = tuple(v for v in g.vertices if v in keep_set)
    edges = tuple((t, h) for t, h in g.edges if t in keep_set and h in keep_set)
    return Dag(verts, edges)


def connected_components(g: Dag) -> list[tuple[str, ...]]:
    """Undirected components, each listed in declaration order; components
    ordered by their earliest-declared vertex."""
    unseen = set(g.vertices)
    comps = []
    for v in g.vertices:
        if v not in unseen:
            continue
        comp = {v}
        unseen.discard(v)
        stack = [v]
        while stack:
            u = stack.pop()
            for w in g._index["succ"][u] + g._index["pred"][u]:
                if w in unseen:
                    unseen.discard(w)
                    comp.add(w)
                    stack.append(w)
        comps.append(tuple(x for x in g.vertices if x in comp))
    return comps
