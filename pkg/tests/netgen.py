"""Random valid capsule networks for property suites.

Networks are grown vertex by vertex in topological order; every connection is
chosen so the shapes already agree, so the result always passes validation.
`kink_margin` measures how close a forward pass sits to a relu/maxpool
nondifferentiability so gradient tests can resample instead of asserting at a
kink.
"""

import numpy as np

from capsforge import capsule as cm
from capsforge import tensor as tz
from capsforge.graph import build_dag, is_connected


def _rank1_shape(rng):
    return (int(rng.integers(2, 6)),)


def _rank3_shape(rng):
    d = int(rng.integers(1, 3))
    M = int(rng.integers(2, 7))
    N = int(rng.integers(2, 7))
    return (d, M, N)


def _divisors(n):
    return [k for k in range(1, n + 1) if n % k == 0]


def _first_op(rng, src_shape):
    """Choose an op out of a rank-compatible pool and return (op, wshape, out)."""
    if len(src_shape) == 1:
        n = src_shape[0]
        kind = rng.choice(["matmul", "matmul", "transfer", "scalar_mult"])
        if kind == "matmul":
            m = int(rng.integers(2, 6))
            return cm.WeightingOp("matmul"), (m, n), (m,)
        if kind == "transfer":
            return cm.WeightingOp("transfer"), None, (n,)
        return cm.WeightingOp("scalar_mult"), (), (n,)
    d, M, N = src_shape
    kind = rng.choice(["conv", "conv", "transfer", "scalar_mult", "reshape_flatten"])
    if kind == "conv":
        k = int(rng.integers(1, 3))
        m = int(rng.integers(1, M + 1))
        n = int(rng.integers(1, N + 1))
        strides = [s for s in (1, 2) if (M - m) % s == 0 and (N - n) % s == 0]
        s = int(rng.choice(strides))
        out = (k, (M - m) // s + 1, (N - n) // s + 1)
        return cm.WeightingOp("conv", s), (k, d, m, n), out
    if kind == "transfer":
        return cm.WeightingOp("transfer"), None, (d, M, N)
    if kind == "scalar_mult":
        return cm.WeightingOp("scalar_mult"), (), (d, M, N)
    return cm.WeightingOp("reshape_flatten"), None, (d * M * N,)


def _bridge_op(rng, src_shape, u_shape):
    """An op carrying src_shape onto u_shape, or None if no clean bridge."""
    if len(u_shape) == 1:
        u = u_shape[0]
        if len(src_shape) == 1:
            if src_shape[0] == u and rng.random() < 0.4:
                return (cm.WeightingOp(rng.choice(["transfer", "scalar_mult"])),
                        None if rng.random() < 0.5 else ())
            return cm.WeightingOp("matmul"), (u, src_shape[0])
        if src_shape[0] * src_shape[1] * src_shape[2] == u:
            return cm.WeightingOp("reshape_flatten"), None
        return None
    if len(src_shape) != 3:
        return None
    k, Mu, Nu = u_shape
    d, M, N = src_shape
    if src_shape == u_shape and rng.random() < 0.5:
        return (cm.WeightingOp(rng.choice(["transfer", "scalar_mult"])),
                None if rng.random() < 0.5 else ())
    if M >= Mu and N >= Nu:
        return cm.WeightingOp("conv", 1), (k, d, M - Mu + 1, N - Nu + 1)
    return None


def _norm_wshape(op, wshape):
    # _bridge_op's transfer/scalar marker: None for transfer, () for scalar.
    if op.kind == "transfer":
        return None
    if op.kind == "scalar_mult":
        return ()
    return wshape


def random_capsule_network(rng, max_capsules=8, dtype=tz.DType.F64):
    """A connected, shape-valid capsule network with 1-2 inputs and up to
    `max_capsules` capsules covering the full op/fn vocabulary."""
    while True:
        net = _try_random_network(rng, max_capsules, dtype)
        if net is not None:
            return net


def _try_random_network(rng, max_capsules, dtype):
    n_inputs = int(rng.integers(1, 3))
    n_caps = int(rng.integers(1, max_capsules + 1))
    vertices = []
    shapes = {}
    for i in range(n_inputs):
        vid = f"x{i}"
        vertices.append(vid)
        shapes[vid] = _rank1_shape(rng) if rng.random() < 0.5 else _rank3_shape(rng)
    capsules = {}
    connections = {}
    edges = []
    for i in range(n_caps):
        vid = f"c{i}"
        # First source biased towards the most recent vertex to keep depth.
        pool = vertices if rng.random() < 0.4 else vertices[-2:]
        z0 = str(rng.choice(pool))
        op, wshape, u_shape = _first_op(rng, shapes[z0])
        sources = {z0: (op, wshape)}
        for _ in range(int(rng.integers(0, 3))):
            z = str(rng.choice(vertices))
            if z in sources:
                continue
            bridge = _bridge_op(rng, shapes[z], u_shape)
            if bridge is None:
                continue
            bop, bw = bridge
            sources[z] = (bop, _norm_wshape(bop, bw))
        fn = _pick_fn(rng, u_shape)
        out_shape = cm.cap_output_shape(fn, u_shape)
        for z, (zop, zw) in sources.items():
            weight = None if zw is None else tz.zeros(zw, dtype)
            connections[(z, vid)] = cm.ConnectionSpec(z, vid, zop, weight)
            edges.append((z, vid))
        capsules[vid] = cm.CapsuleSpec(vid, fn, tz.zeros(u_shape, dtype), out_shape)
        vertices.append(vid)
        shapes[vid] = out_shape
    dag = build_dag(vertices, edges)
    if not is_connected(dag):
        return None
    net = cm.CapsuleNetwork(dag, {v: shapes[v] for v in vertices if v.startswith("x")},
                            capsules, connections, dtype)
    assert cm.validate_shapes(net).ok
    return net


def _pick_fn(rng, u_shape):
    if len(u_shape) == 1:
        kind = rng.choice(["relu", "sigmoid", "identity", "softmax", "squash"])
        return cm.CapsuleFn(str(kind))
    _, M, N = u_shape
    kind = str(rng.choice(["relu", "sigmoid", "identity", "maxpool", "maxpool"]))
    if kind != "maxpool":
        return cm.CapsuleFn(kind)
    lam = int(rng.choice(_divisors(M)))
    tau = int(rng.choice(_divisors(N)))
    return cm.CapsuleFn("maxpool", (lam, tau))


def randomize_parameters(net, rng, scale=1.0):
    params = net.parameters()
    for key in params.weights:
        params.weights[key] = rng.uniform(-scale, scale,
                                          size=params.weights[key].shape)
    for key in params.biases:
        params.biases[key] = rng.uniform(-0.5, 0.5, size=params.biases[key].shape)
    if net.dtype is not tz.DType.F64:
        params = cm.Parameters(
            {k: v.astype(net.dtype.np) for k, v in params.weights.items()},
            {k: v.astype(net.dtype.np) for k, v in params.biases.items()})
    return params


def random_inputs(net, rng):
    return {vid: tz.tensor(rng.standard_normal(size=shape), net.dtype)
            for vid, shape in net.input_shapes.items()}


def random_targets(net, result, rng, loss_kind):
    """Targets for every output vertex, compatible with the loss."""
    targets = {}
    for vid in net.parts.outputs:
        shape = result.ys[vid].shape
        if loss_kind == "cross_entropy":
            t = np.zeros(shape)
            t[int(rng.integers(0, shape[0]))] = 1.0
            targets[vid] = tz.tensor(t, net.dtype)
        else:
            targets[vid] = tz.tensor(rng.standard_normal(size=shape), net.dtype)
    return targets


def kink_margin(net, result):
    """Distance of the forward pass from the nearest relu zero crossing or
    maxpool tie; large values mean finite differences are trustworthy."""
    margin = np.inf
    for vid, spec in net.capsules.items():
        u = result.us[vid]
        if spec.fn.kind == "relu":
            margin = min(margin, float(np.min(np.abs(u))))
        elif spec.fn.kind == "maxpool":
            lam, tau = spec.fn.window
            d, M, N = u.shape
            blocks = (u.reshape(d, M // lam, lam, N // tau, tau)
                       .transpose(0, 1, 3, 2, 4)
                       .reshape(-1, lam * tau))
            if blocks.shape[1] > 1:
                part = np.sort(blocks, axis=1)
                margin = min(margin, float(np.min(part[:, -1] - part[:, -2])))
    return margin
