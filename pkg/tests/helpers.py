"""Shared test utilities: exhaustive small-graph enumeration oracles."""

from capsforge.graph import Dag, build_dag, roles


def ordered_partitions(items):
    """All ordered set partitions of `items` into nonempty blocks."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in ordered_partitions(rest):
        for i, block in enumerate(part):
            yield part[:i] + [block | {first}] + part[i + 1:]
        for i in range(len(part) + 1):
            yield part[:i] + [{first}] + part[i:]


def layering_exists_bruteforce(g: Dag) -> bool:
    """Exhaustive search: the first layer must be the inputs and the last the
    outputs, so only the hidden vertices need partitioning."""
    parts = roles(g)
    inputs, outputs = set(parts.inputs), set(parts.outputs)
    for middle in ordered_partitions(parts.hiddens):
        layers = [inputs] + middle + [outputs]
        level = {v: i for i, layer in enumerate(layers) for v in layer}
        if len(level) == len(g.vertices) and all(
                level[h] == level[t] + 1 for t, h in g.edges):
            return True
    return False


def iter_connected_dags(max_vertices, min_vertices=1):
    """Every connected DAG with up to `max_vertices` vertices, enumerated as
    upper-triangular adjacency relations over topologically ordered labels.

    Every DAG admits a topological labeling, so each isomorphism class of
    connected DAGs appears at least once. Connectivity is screened with a
    union-find over the edge mask before any Dag object is built.
    """
    for n in range(min_vertices, max_vertices + 1):
        names = [f"v{i}" for i in range(n)]
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        for mask in range(1 << len(pairs)):
            if n > 1 and not _mask_connected(n, pairs, mask):
                continue
            edges = [(names[i], names[j])
                     for b, (i, j) in enumerate(pairs) if mask >> b & 1]
            yield build_dag(names, edges)


def _mask_connected(n, pairs, mask):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for b, (i, j) in enumerate(pairs):
        if mask >> b & 1:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[ri] = rj
    root = find(0)
    return all(find(i) == root for i in range(n))


def count_connected_dags(max_vertices):
    return sum(1 for _ in iter_connected_dags(max_vertices))
