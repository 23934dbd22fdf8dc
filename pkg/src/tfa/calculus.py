"""Delay-jitter and burstiness maps of Total Flow Analysis.

* ``D_i(z_inc(i))``: delay-jitter bound at node ``i``, the minimum of one or
  more isotone affine forms in the burstinesses entering ``i``.
* ``Z_l(d)``: burstiness of each flow on transit edge ``l``, the source burst
  plus the flow rate times the delay jitter accumulated upstream.
* ``G(z, d) = (Z(d), D(z))``: the combined map iterated by every solver.

Dict-level functions (:func:`eval_delay`, :func:`eval_burstiness`,
:func:`eval_Zfp`) index by node, edge and flow; :class:`GlobalMap` compiles
the same maps into flat arrays for the kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from types import SimpleNamespace
from typing import Mapping, Sequence

import numpy as np

from tfa import kernels
from tfa.model import (
    AffineForm,
    Edge,
    Network,
    NetworkError,
    Node,
    Pair,
    ZeroJitterFloor,
    build_network,
    edge_label,
)

__all__ = [
    "AffineForm",
    "DelayModel",
    "GlobalMap",
    "IndexMismatch",
    "MissingDelay",
    "MissingInEdge",
    "State",
    "default_delay_model",
    "end_to_end_bounds",
    "eval_D",
    "eval_G",
    "eval_Z",
    "eval_Zfp",
    "eval_burstiness",
    "eval_delay",
    "global_map",
    "line_shaping_forms",
    "with_line_shaping",
]


class IndexMismatch(NetworkError):
    pass


class MissingDelay(NetworkError):
    pass


class MissingInEdge(NetworkError):
    pass


@dataclass(frozen=True)
class DelayModel:
    node: str
    forms: tuple[AffineForm, ...]
    inputs: tuple[Pair, ...]

    def __post_init__(self):
        if not self.forms:
            raise ValueError("a delay model needs at least one affine form")
        if not self.floor() > 0:
            raise ZeroJitterFloor(f"delay model of node {self.node} is 0 at zero burstiness")

    def floor(self) -> float:
        return min(f.constant for f in self.forms)

    def __call__(self, z_inc: Mapping[Pair, float]) -> float:
        return eval_delay(self, z_inc)


def default_delay_model(node: Node, net: Network) -> DelayModel:
    """Rate-latency bound for the aggregate at ``node``, plus any extra forms.

    The base form is ``T + P + (fresh bursts)/R + sum(z)/R`` over every transit
    pair entering the node.
    """
    fresh = sum(net.flows[f].burst for f in net.fresh_flows(node.id))
    inputs = net.inc_pairs(node.id)
    inv = 1.0 / node.rate
    base = AffineForm(
        node.latency + node.packetization_delay + fresh / node.rate,
        {p: inv for p in inputs},
    )
    return DelayModel(node.id, (base, *node.extra_delay_bounds), inputs)


def eval_delay(model: DelayModel, z_inc: Mapping[Pair, float]) -> float:
    if set(z_inc) != set(model.inputs):
        raise IndexMismatch(f"burstiness arguments do not match the inputs of node {model.node}")
    best = 0.0
    for k, form in enumerate(model.forms):
        acc = form.constant
        for p in model.inputs:
            acc = acc + form.coefficient(p) * z_inc[p]
        if k == 0 or acc < best:
            best = acc
    return best


def eval_burstiness(net: Network, edge: Edge, flow: str, d: Mapping[str, float]) -> float:
    """``b_f + r_f * sum(d_u for u in pred_f(edge))``, summed in node-id order."""
    upstream = net.pred_f(edge, flow)
    missing = [u for u in upstream if u not in d]
    if missing:
        raise MissingDelay(f"no delay given for node(s) {sorted(missing)}")
    f = net.flows[flow]
    s = 0.0
    for u in sorted(upstream):
        s = s + d[u]
    return f.burst + f.rate * s


def eval_Zfp(net: Network, i: str, d_i: float, z_inc: Mapping[Pair, float]) -> dict[Pair, float]:
    """Burstinesses on ``out(i)`` from the node's delay and its input burstinesses.

    A transit flow gets its input burstiness plus ``r_f * d_i``; a flow fresh at
    ``i`` gets ``b_f + r_f * d_i``.
    """
    result = {}
    for pair in net.out_pairs(i):
        flow = net.flows[pair[1]]
        up = net.upstream_pair(pair)
        if up is None:
            base = flow.burst
        elif up in z_inc:
            base = z_inc[up]
        else:
            raise MissingInEdge(f"no input burstiness for flow {flow.id} on {edge_label(up[0])}")
        result[pair] = base + flow.rate * d_i
    return result


@dataclass(frozen=True, eq=False)
class State:
    """Burstiness bounds ``z`` (bits, per pair) and delay jitters ``d`` (s, per node)."""

    pairs: tuple[Pair, ...]
    nodes: tuple[str, ...]
    z: np.ndarray
    d: np.ndarray

    @classmethod
    def zero(cls, net: Network) -> State:
        return cls(net.pairs, net.node_ids, np.zeros(len(net.pairs)), np.zeros(len(net.node_ids)))

    def z_of(self, edge: Edge, flow: str) -> float:
        return float(self.z[self.pairs.index((tuple(edge), flow))])

    def d_of(self, node: str) -> float:
        return float(self.d[self.nodes.index(node)])

    def z_map(self) -> dict[Pair, float]:
        return dict(zip(self.pairs, self.z.tolist()))

    def d_map(self) -> dict[str, float]:
        return dict(zip(self.nodes, self.d.tolist()))

    def vector(self) -> np.ndarray:
        """All delays then all burstinesses, the variable order of the oracle."""
        return np.concatenate([self.d, self.z])

    def copy(self) -> State:
        return State(self.pairs, self.nodes, self.z.copy(), self.d.copy())

    def leq(self, other: State, rtol: float = 0.0, atol: float = 0.0) -> bool:
        """Componentwise ``self <= other`` up to ``atol + rtol * |other|``."""
        a, b = self.vector(), other.vector()
        return bool(np.all(a <= b + atol + rtol * np.abs(b)))

    def __le__(self, other: State) -> bool:
        return self.leq(other)

    def __ge__(self, other: State) -> bool:
        return other.leq(self)

    def __eq__(self, other):
        if not isinstance(other, State):
            return NotImplemented
        return bool(np.array_equal(self.z, other.z) and np.array_equal(self.d, other.d))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.z)) and np.all(np.isfinite(self.d)))


class GlobalMap:
    """``G`` compiled to flat index arrays in canonical order.

    Delay forms are stored CSR-style per node (base form first), and each pair
    keeps its upstream node list sorted by node index.
    """

    def __init__(self, net: Network):
        self.net = net
        pidx, nidx = net.pair_index, net.node_index
        self.models = tuple(default_delay_model(net.nodes[n], net) for n in net.node_ids)

        node_form_ptr, form_const, form_ptr, form_pair, form_coef = [0], [], [0], [], []
        for model in self.models:
            for form in model.forms:
                form_const.append(form.constant)
                for p in model.inputs:
                    c = form.coefficient(p)
                    if c != 0.0:
                        form_pair.append(pidx[p])
                        form_coef.append(c)
                form_ptr.append(len(form_pair))
            node_form_ptr.append(len(form_const))

        pair_burst, pair_rate, pred_ptr, pred_node, pair_up = [], [], [0], [], []
        for pair in net.pairs:
            edge, fid = pair
            flow = net.flows[fid]
            pair_burst.append(flow.burst)
            pair_rate.append(flow.rate)
            pred_node.extend(sorted(nidx[u] for u in net.pred_f(edge, fid)))
            pred_ptr.append(len(pred_node))
            up = net.upstream_pair(pair)
            pair_up.append(-1 if up is None else pidx[up])

        out_ptr, out_pair = [0], []
        for n in net.node_ids:
            out_pair.extend(pidx[p] for p in net.out_pairs(n))
            out_ptr.append(len(out_pair))

        ints = lambda xs: np.asarray(xs, dtype=np.intp)
        floats = lambda xs: np.asarray(xs, dtype=np.float64)
        self.n_nodes = len(net.node_ids)
        self.n_pairs = len(net.pairs)
        self.node_form_ptr = ints(node_form_ptr)
        self.form_const = floats(form_const)
        self.form_ptr = ints(form_ptr)
        self.form_pair = ints(form_pair)
        self.form_coef = floats(form_coef)
        self.pair_burst = floats(pair_burst)
        self.pair_rate = floats(pair_rate)
        self.pred_ptr = ints(pred_ptr)
        self.pred_node = ints(pred_node)
        self.pair_up = ints(pair_up)
        self.out_ptr = ints(out_ptr)
        self.out_pair = ints(out_pair)

    @cached_property
    def py(self) -> SimpleNamespace:
        """The index arrays as Python lists, for the pure-Python kernels."""
        names = (
            "node_form_ptr form_const form_ptr form_pair form_coef pair_burst pair_rate "
            "pred_ptr pred_node pair_up out_ptr out_pair"
        ).split()
        ns = SimpleNamespace(**{k: getattr(self, k).tolist() for k in names})
        ns.n_nodes, ns.n_pairs = self.n_nodes, self.n_pairs
        return ns

    @property
    def is_affine(self) -> bool:
        return all(len(m.forms) == 1 for m in self.models)

    def zero(self) -> State:
        return State.zero(self.net)

    def state(self, z: np.ndarray, d: np.ndarray) -> State:
        return State(self.net.pairs, self.net.node_ids, np.asarray(z, dtype=float), np.asarray(d, dtype=float))

    def _check(self, state: State) -> None:
        if state.z.shape != (self.n_pairs,) or state.d.shape != (self.n_nodes,):
            raise IndexMismatch("state does not cover the network's canonical index")

    def Z(self, d: np.ndarray) -> np.ndarray:
        d = np.ascontiguousarray(d, dtype=np.float64)
        if d.shape != (self.n_nodes,):
            raise IndexMismatch("delay vector does not cover every node")
        out = np.empty(self.n_pairs)
        kernels.backend().burstinesses(self, d, out)
        return out

    def D(self, z: np.ndarray) -> np.ndarray:
        z = np.ascontiguousarray(z, dtype=np.float64)
        if z.shape != (self.n_pairs,):
            raise IndexMismatch("burstiness vector does not cover every transit pair")
        out = np.empty(self.n_nodes)
        kernels.backend().delays(self, z, out)
        return out

    def G(self, state: State) -> State:
        self._check(state)
        return self.state(self.Z(state.d), self.D(state.z))

    def end_to_end(self, d: np.ndarray) -> dict[str, float]:
        return end_to_end_bounds(self.net, dict(zip(self.net.node_ids, np.asarray(d).tolist())))


def global_map(net: Network) -> GlobalMap:
    """The compiled map of ``net``, built once per network object."""
    gm = net.__dict__.get("_global_map")
    if gm is None:
        gm = GlobalMap(net)
        net.__dict__["_global_map"] = gm
    return gm


def eval_Z(net: Network, d: np.ndarray) -> np.ndarray:
    return global_map(net).Z(d)


def eval_D(net: Network, z: np.ndarray) -> np.ndarray:
    return global_map(net).D(z)


def eval_G(net: Network, state: State) -> State:
    return global_map(net).G(state)


def end_to_end_bounds(net: Network, d: Mapping[str, float]) -> dict[str, float]:
    """Per-flow end-to-end bound: the sum of node delay jitters along the path, in node-id order."""
    result = {}
    for fid, flow in net.flows.items():
        s = 0.0
        for u in sorted(flow.path):
            s = s + d[u]
        result[fid] = s
    return result


def line_shaping_forms(net: Network, node_id: str, line_rate: float, max_packet: float) -> list[AffineForm]:
    """Extra delay bounds exploiting line shaping on each incoming transit link.

    The aggregate of transit flows arriving over one link is also constrained by
    ``line_rate * t + max_packet``. For weight ``lam`` in [0, 1],
    ``min(c t + l, rho t + B) <= lam (c t + l) + (1 - lam)(rho t + B)``; taking the
    largest ``lam`` that keeps the total arrival slope within the service rate ``R``
    puts the worst case at ``t = 0`` and yields a valid affine bound with
    coefficient ``(1 - lam) / R`` on that link's burstinesses.
    """
    node = net.nodes[node_id]
    R = node.rate
    total = sum(net.flows[f].rate for f in net.crossing_flows(node_id))
    fresh = sum(net.flows[f].burst for f in net.fresh_flows(node_id))
    inputs = net.inc_pairs(node_id)
    base = node.latency + node.packetization_delay
    forms = []
    for edge in net.inc(node_id):
        rho = sum(net.flows[f].rate for f in net.edge_flows[edge])
        if line_rate <= rho:
            continue
        lam = min(1.0, max(0.0, (R - total) / (line_rate - rho)))
        if lam == 0.0:
            continue
        coefficients = {p: (1.0 - lam) / R if p[0] == edge else 1.0 / R for p in inputs}
        forms.append(AffineForm(base + (fresh + lam * max_packet) / R, coefficients))
    return forms


def with_line_shaping(net: Network, line_rate: float, max_packet: float) -> Network:
    """Copy of ``net`` with :func:`line_shaping_forms` appended at every node."""
    nodes = []
    for node in net.nodes.values():
        forms = line_shaping_forms(net, node.id, line_rate, max_packet)
        nodes.append(
            Node(
                node.id,
                node.rate,
                node.latency,
                node.packetization,
                node.extra_delay_bounds + tuple(forms),
                node.line_rate,
                node.max_packet,
            )
        )
    return build_network(nodes, net.flows.values())


def z_restrict(state: State, pairs: Sequence[Pair]) -> dict[Pair, float]:
    zmap = state.z_map()
    return {p: zmap[p] for p in pairs}
