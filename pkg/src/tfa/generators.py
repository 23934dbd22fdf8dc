"""Benchmark and test topologies."""

from __future__ import annotations

import numpy as np

from tfa.model import AffineForm, Flow, InvalidSpec, Network, Node, build_network

RING_T = 0.001
RING_R = 1e7
RING_B = 1000.0

# Paths of the four-flow toy network with cyclic dependencies over ports O1..O12.
TWELVE_PORT_PATHS = {
    "f_r": ("O5", "O4", "O3", "O2", "O1", "O6", "O7", "O8", "O9"),
    "f_bl": ("O6", "O7", "O8", "O9", "O10", "O5", "O4", "O3", "O2"),
    "f_g": ("O6", "O7", "O11", "O3", "O2"),
    "f_br": ("O5", "O4", "O12", "O8", "O9"),
}


def ring(n: int, T: float = RING_T, R: float = RING_R, r: float | None = None, b: float = RING_B) -> Network:
    """``n`` servers N1..Nn on a directed ring; flow fk starts at Nk and crosses n-1 servers."""
    if n < 2:
        raise InvalidSpec(f"a ring needs at least 2 nodes, got {n}")
    if r is None:
        r = 0.7 * R / n
    if not (T > 0 and R > 0 and r > 0 and b > 0):
        raise InvalidSpec("ring parameters must be positive")
    nodes = [Node(f"N{k}", R, T) for k in range(1, n + 1)]
    flows = [
        Flow(f"f{k}", r, b, tuple(f"N{(k - 1 + h) % n + 1}" for h in range(n - 1))) for k in range(1, n + 1)
    ]
    return build_network(nodes, flows)


def tandem(T: float = 0.001, R: float = 1e7, r: float = 1e6, b: float = 1000.0) -> Network:
    """Two servers A -> B crossed by one flow."""
    return build_network([Node("A", R, T), Node("B", R, T)], [Flow("f", r, b, ("A", "B"))])


def twelve_port(T: float = 0.001, R: float = 1e7, r: float = 1e6, b: float = 1000.0) -> Network:
    nodes = [Node(f"O{k}", R, T) for k in range(1, 13)]
    flows = [Flow(fid, r, b, path) for fid, path in TWELVE_PORT_PATHS.items()]
    return build_network(nodes, flows)


def random_network(
    seed: int | np.random.Generator,
    max_nodes: int = 8,
    max_flows: int = 6,
    acyclic: bool | None = None,
    max_utilization: float = 0.9,
    extra_form_prob: float = 0.0,
) -> Network:
    """Random locally stable network.

    ``acyclic=True`` draws every path along one hidden node order; ``False``
    resamples until the induced graph has a cycle; ``None`` takes whatever comes.
    ``extra_form_prob`` is the chance that a node gets an extra affine delay form.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    for _ in range(1000):
        n = int(rng.integers(2, max_nodes + 1))
        ids = [f"n{k}" for k in range(n)]
        hidden = list(rng.permutation(n))
        paths = []
        for _ in range(int(rng.integers(1, max_flows + 1))):
            length = int(rng.integers(1, n + 1))
            picks = list(rng.choice(n, size=length, replace=False))
            if acyclic:
                picks.sort(key=hidden.index)
            paths.append(tuple(ids[k] for k in picks))
        rates = rng.uniform(0.2, 1.0, size=len(paths))
        service = rng.uniform(1e7, 1e8, size=n)
        load = np.zeros(n)
        for p, rate in zip(paths, rates):
            for node in p:
                load[ids.index(node)] += rate
        target = rng.uniform(0.05, max_utilization)
        scale = target / max(load[k] / service[k] for k in range(n) if load[k] > 0)
        flows = [
            Flow(f"f{k}", float(rate * scale), float(rng.uniform(100.0, 5000.0)), p)
            for k, (p, rate) in enumerate(zip(paths, rates))
        ]
        nodes = [Node(ids[k], float(service[k]), float(rng.uniform(1e-5, 1e-3))) for k in range(n)]
        net = build_network(nodes, flows)
        if acyclic is False and not net.is_cyclic():
            continue
        if extra_form_prob > 0:
            net = _add_extra_forms(net, rng, extra_form_prob)
        return net
    raise RuntimeError("could not draw a network with the requested structure")


def _add_extra_forms(net: Network, rng: np.random.Generator, prob: float) -> Network:
    nodes = []
    for node in net.nodes.values():
        forms = ()
        if rng.random() < prob:
            inputs = net.inc_pairs(node.id)
            coefs = {p: float(rng.uniform(0.2, 1.0)) / node.rate for p in inputs}
            fresh = sum(net.flows[f].burst for f in net.fresh_flows(node.id))
            constant = node.latency + fresh / node.rate + float(rng.uniform(0.0, 5e-4))
            forms = (AffineForm(constant, coefs),)
        nodes.append(Node(node.id, node.rate, node.latency, extra_delay_bounds=forms))
    return build_network(nodes, net.flows.values())
