"""The generative calculus for plain (scalar) networks.

A plain network is the 4-tuple of input variables, non-input neurons
(activation + bias), weighting connections, and outputs. Networks are built
exclusively by replaying generation steps — one of the four rules: variable,
neuron, growth, convergence — and every connected DAG can be rebuilt this way
(`derive_generation_sequence` is the constructive procedure; `replay` is its
inverse witness).

Enumeration counts label networks by neuron creation order: two children
grown from different parents count separately even when isomorphic. The
`*_distinct` helpers give the isomorphism-deduplicated counts as a diagnostic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from . import graph as graphmod
from .errors import (EmptySubset, MissingInput, MultipleComponentsRemain,
                     NotConnected, OverlappingNetworks, UnknownNode)
from .graph import Dag, build_dag

ACTIVATIONS: dict[str, tuple[Callable[[float], float], Callable[[float], float]]] = {
    # tag -> (function, derivative at preactivation)
    "relu": (lambda u: u if u > 0 else 0.0, lambda u: 1.0 if u > 0 else 0.0),
    "sigmoid": (lambda u: 1.0 / (1.0 + math.exp(-u)) if u >= 0
                else math.exp(u) / (1.0 + math.exp(u)),
                lambda u: (s := (1.0 / (1.0 + math.exp(-u)) if u >= 0
                                 else math.exp(u) / (1.0 + math.exp(u)))) * (1 - s)),
    "identity": (lambda u: u, lambda u: 1.0),
    "tanh": (math.tanh, lambda u: 1.0 - math.tanh(u) ** 2),
}


@dataclass(frozen=True)
class PlainNeuron:
    id: str
    fn: str = "identity"
    bias: float = 0.0


@dataclass(frozen=True)
class PlainConnection:
    tail: str
    head: str
    strength: float = 1.0


@dataclass(frozen=True)
class PlainNetwork:
    inputs: tuple[str, ...]
    neurons: tuple[PlainNeuron, ...]          # creation order
    connections: tuple[PlainConnection, ...]

    @property
    def node_ids(self) -> tuple[str, ...]:
        return self.inputs + tuple(n.id for n in self.neurons)

    def to_dag(self) -> Dag:
        return build_dag(self.node_ids, [(c.tail, c.head) for c in self.connections])

    def outputs(self) -> dict[str, str]:
        """Symbolic output expression for every node, per the recursive rules."""
        exprs: dict[str, str] = {x: x for x in self.inputs}
        incoming: dict[str, list[PlainConnection]] = {n.id: [] for n in self.neurons}
        for c in self.connections:
            incoming[c.head].append(c)
        for nid in graphmod.topo_order(self.to_dag()):
            if nid in exprs:
                continue
            neuron = next(n for n in self.neurons if n.id == nid)
            terms = " + ".join(f"{c.strength:g}*{exprs_name(c.tail)}"
                               for c in incoming[nid])
            exprs[nid] = f"{neuron.fn}({terms} + {neuron.bias:g})"
        return exprs


def exprs_name(node: str) -> str:
    return f"y_{node}"


def _check_plain(net: PlainNetwork) -> PlainNetwork:
    ids = net.node_ids
    if len(set(ids)) != len(ids):
        raise OverlappingNetworks(f"duplicate node id in {ids}")
    heads_with_in = {c.head for c in net.connections}
    for n in net.neurons:
        if n.id not in heads_with_in:
            raise UnknownNode(f"neuron {n.id!r} has no incoming connection")
        if n.fn not in ACTIVATIONS:
            raise UnknownNode(f"unknown activation {n.fn!r}")
    net.to_dag()  # validates edge endpoints + acyclicity
    return net


# --- generation steps -------------------------------------------------------

@dataclass(frozen=True)
class GenerationStep:
    """One application of a generation rule.

    rule: "variable" | "neuron" | "growth" | "convergence".
    new_id: the created node (the variable itself, or the fresh neuron).
    sources: nodes wired into the fresh neuron (flattened union for
             convergence; empty for variable).
    groups: for convergence, the per-network source groups A_1..A_K.
    weights: connection strengths aligned with `sources`.
    """

    rule: str
    new_id: str
    sources: tuple[str, ...] = ()
    groups: tuple[tuple[str, ...], ...] = ()
    fn: str = "identity"
    bias: float = 0.0
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        if self.rule not in ("variable", "neuron", "growth", "convergence"):
            raise ValueError(f"unknown rule {self.rule!r}")
        if not self.weights and self.sources:
            object.__setattr__(self, "weights", (1.0,) * len(self.sources))
        if len(self.weights) != len(self.sources):
            raise ValueError("weights must align with sources")

    def describe(self) -> str:
        if self.rule == "variable":
            return f"variable {self.new_id}"
        srcs = ", ".join(self.sources)
        if self.rule == "convergence":
            grp = " | ".join("{" + ", ".join(g) + "}" for g in self.groups)
            return (f"convergence {self.new_id} <- groups {grp} "
                    f"(fn={self.fn}, bias={self.bias:g})")
        return f"{self.rule} {self.new_id} <- {{{srcs}}} (fn={self.fn}, bias={self.bias:g})"


def variable(x: str) -> GenerationStep:
    return GenerationStep("variable", x)


def neuron(new_id: str, variables: Sequence[str], fn: str = "identity",
           bias: float = 0.0, weights: Sequence[float] = ()) -> GenerationStep:
    return GenerationStep("neuron", new_id, tuple(variables), (), fn, bias,
                          tuple(weights))


def growth(new_id: str, sources: Sequence[str], fn: str = "identity",
           bias: float = 0.0, weights: Sequence[float] = ()) -> GenerationStep:
    return GenerationStep("growth", new_id, tuple(sources), (), fn, bias,
                          tuple(weights))


def convergence(new_id: str, groups: Sequence[Sequence[str]], fn: str = "identity",
                bias: float = 0.0, weights: Sequence[float] = ()) -> GenerationStep:
    groups = tuple(tuple(g) for g in groups)
    sources = tuple(itertools.chain.from_iterable(groups))
    return GenerationStep("convergence", new_id, sources, groups, fn, bias,
                          tuple(weights))


def apply_step(state: Sequence[PlainNetwork], step: GenerationStep) -> list[PlainNetwork]:
    """Apply one rule to a list of pairwise-disjoint networks.

    Returns the new state; the input state is never mutated.
    """
    state = list(state)
    used = {nid for net in state for nid in net.node_ids}

    def fresh(nid: str):
        if nid in used:
            raise OverlappingNetworks(f"node id {nid!r} already exists")

    if step.rule == "variable":
        fresh(step.new_id)
        return state + [PlainNetwork((step.new_id,), (), ())]

    if not step.sources:
        raise EmptySubset(f"{step.rule} requires a nonempty source subset")
    if len(set(step.sources)) != len(step.sources):
        raise UnknownNode(f"duplicate source in {step.sources}")
    new_neuron = PlainNeuron(step.new_id, step.fn, step.bias)
    conns = tuple(PlainConnection(z, step.new_id, w)
                  for z, w in zip(step.sources, step.weights))

    if step.rule == "neuron":
        fresh(step.new_id)
        for z in step.sources:
            fresh(z)
        return state + [_check_plain(PlainNetwork(tuple(step.sources),
                                                  (new_neuron,), conns))]

    if step.rule == "growth":
        fresh(step.new_id)
        owner = _owner_index(state, step.sources[0])
        net = state[owner]
        nodes = set(net.node_ids)
        for z in step.sources:
            if z not in nodes:
                raise UnknownNode(f"node {z!r} is not in the target network")
        grown = PlainNetwork(net.inputs, net.neurons + (new_neuron,),
                             net.connections + conns)
        return state[:owner] + [_check_plain(grown)] + state[owner + 1:]

    # convergence
    fresh(step.new_id)
    if not step.groups or any(not g for g in step.groups):
        raise EmptySubset("convergence requires nonempty groups")
    owners = []
    for group in step.groups:
        idx = _owner_index(state, group[0])
        nodes = set(state[idx].node_ids)
        for z in group:
            if z not in nodes:
                raise UnknownNode(f"node {z!r} is not in its group's network")
        owners.append(idx)
    if len(set(owners)) != len(owners):
        raise OverlappingNetworks(
            "convergence groups must come from pairwise disjoint networks")
    merged_inputs, merged_neurons, merged_conns = [], [], []
    for idx in owners:
        merged_inputs.extend(state[idx].inputs)
        merged_neurons.extend(state[idx].neurons)
        merged_conns.extend(state[idx].connections)
    merged = PlainNetwork(tuple(merged_inputs),
                          tuple(merged_neurons) + (new_neuron,),
                          tuple(merged_conns) + conns)
    rest = [net for i, net in enumerate(state) if i not in set(owners)]
    return rest + [_check_plain(merged)]


def _owner_index(state: Sequence[PlainNetwork], node: str) -> int:
    for i, net in enumerate(state):
        if node in net.node_ids:
            return i
    raise UnknownNode(f"node {node!r} is not in any network")


def replay(steps: Iterable[GenerationStep]) -> PlainNetwork:
    """Apply steps from an empty state; the result must be a single network."""
    state: list[PlainNetwork] = []
    for step in steps:
        state = apply_step(state, step)
    if len(state) != 1:
        raise MultipleComponentsRemain(
            f"replay left {len(state)} disjoint networks instead of one")
    return state[0]


# --- enumeration -------------------------------------------------------------

def grow_children(net: PlainNetwork, fn: str = "identity",
                  bias: float = 0.0) -> list[PlainNetwork]:
    """All 2^n - 1 growth children, ordered by source-subset bitmask over the
    creation-ordered nodes. The fresh neuron is named h{k+1} where k is the
    current neuron count."""
    nodes = net.node_ids
    k = len(net.neurons) + 1
    while f"h{k}" in nodes:
        k += 1
    new_id = f"h{k}"
    children = []
    for mask in range(1, 1 << len(nodes)):
        subset = tuple(nodes[i] for i in range(len(nodes)) if mask >> i & 1)
        children.append(apply_step([net], growth(new_id, subset, fn, bias))[0])
    return children


def count_growth_descendants(base: PlainNetwork, generations: int) -> int:
    """Number of creation-order-labeled networks after `generations` rounds of
    growth (leaves of the generation tree)."""
    if generations < 1:
        raise ValueError("generations must be >= 1")
    frontier = [base]
    for _ in range(generations):
        frontier = [child for net in frontier for child in grow_children(net)]
    return len(frontier)


def _canonical_certificate(net: PlainNetwork) -> tuple:
    """Isomorphism certificate: minimal edge list over relabelings that permute
    inputs among themselves and neurons among themselves."""
    n_in, n_h = len(net.inputs), len(net.neurons)
    ids = net.node_ids
    best = None
    for pin in itertools.permutations(range(n_in)):
        for ph in itertools.permutations(range(n_h)):
            relabel = {ids[i]: pin[i] for i in range(n_in)}
            relabel.update({net.neurons[i].id: n_in + ph[i] for i in range(n_h)})
            edges = tuple(sorted((relabel[c.tail], relabel[c.head])
                                 for c in net.connections))
            if best is None or edges < best:
                best = edges
    return (n_in, n_h, best)


def count_distinct_growth_descendants(base: PlainNetwork, generations: int) -> int:
    """Diagnostic: same enumeration, counted up to graph isomorphism."""
    if generations < 1:
        raise ValueError("generations must be >= 1")
    frontier = [base]
    for _ in range(generations):
        frontier = [child for net in frontier for child in grow_children(net)]
    return len({_canonical_certificate(net) for net in frontier})


def one_one_network() -> PlainNetwork:
    """x1 -> h1, the smallest non-trivial network."""
    return replay([variable("x1"), growth("h1", ["x1"])])


def two_one_network() -> PlainNetwork:
    """x1, x2 -> h1."""
    return replay([variable("x1"), variable("x2"),
                   convergence("h1", [["x1"], ["x2"]])])


# --- the generation theorem ---------------------------------------------------

def derive_generation_sequence(g: Dag, fn: str = "identity",
                               bias: float = 0.0) -> list[GenerationStep]:
    """Constructive witness: a step sequence whose replay reproduces `g` with
    the same vertex ids and edge set.

    Mirrors the inductive argument: repeatedly detach the last output vertex
    in topological order; if the remainder stays connected the vertex is
    re-attached by growth, otherwise by convergence over the remainder's
    components. A single vertex is a variable.
    """
    if not graphmod.is_connected(g):
        raise NotConnected("generation sequences exist only for connected graphs")

    if len(g.vertices) == 1:
        return [variable(g.vertices[0])]

    order = graphmod.topo_order(g)
    h = order[-1]  # last in topological order is always an output
    in_h = g.predecessors(h)
    remainder = graphmod.subgraph(g, [v for v in g.vertices if v != h])
    components = graphmod.connected_components(remainder)
    if len(components) == 1:
        steps = derive_generation_sequence(remainder, fn, bias)
        steps.append(growth(h, in_h, fn, bias))
        return steps
    steps = []
    groups = []
    for comp in components:
        steps.extend(derive_generation_sequence(
            graphmod.subgraph(remainder, comp), fn, bias))
        groups.append(tuple(z for z in comp if z in set(in_h)))
    steps.append(convergence(h, groups, fn, bias))
    return steps


# --- evaluation -----------------------------------------------------------------

def eval_plain(net: PlainNetwork, assignment: Mapping[str, float]) -> dict[str, float]:
    """Numeric outputs for every node given values for each input variable."""
    missing = [x for x in net.inputs if x not in assignment]
    if missing:
        raise MissingInput(f"missing values for inputs {missing}")
    values: dict[str, float] = {x: float(assignment[x]) for x in net.inputs}
    incoming: dict[str, list[PlainConnection]] = {n.id: [] for n in net.neurons}
    for c in net.connections:
        incoming[c.head].append(c)
    by_id = {n.id: n for n in net.neurons}
    for nid in graphmod.topo_order(net.to_dag()):
        if nid in values:
            continue
        n = by_id[nid]
        u = sum(c.strength * values[c.tail] for c in incoming[nid]) + n.bias
        values[nid] = ACTIVATIONS[n.fn][0](u)
    return values
