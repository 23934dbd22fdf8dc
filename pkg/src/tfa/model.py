"""Network description: output ports, leaky-bucket flows and the flow-induced graph.

A path is a simple sequence of node ids; the last element is the flow's final
output port and sinks are implicit. Transit edges are the consecutive pairs of
every path. All derived collections are sorted by id, which is the canonical
component order used by every state vector in the package.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

Edge = tuple[str, str]
Pair = tuple[Edge, str]


class NetworkError(ValueError):
    """Base class for invalid network descriptions and invalid queries.

    ``where`` names the offending entity (``"flows[2]"``, ``"node O3"``) and
    ``line`` is filled in by the file loader when it can locate the entity.
    """

    def __init__(self, message: str, *, where: str | None = None, line: int | None = None):
        super().__init__(message)
        self.message = message
        self.where = where
        self.line = line

    def __str__(self) -> str:
        text = self.message
        if self.where:
            text = f"{self.where}: {text}"
        if self.line is not None:
            text = f"line {self.line}: {text}"
        return text


class InvalidSpec(NetworkError):
    pass


class UnknownNode(NetworkError):
    pass


class DuplicatePathNode(NetworkError):
    pass


class NonPositiveRate(NetworkError):
    pass


class ZeroJitterFloor(NetworkError):
    pass


class EdgeNotTransit(NetworkError):
    pass


class FlowNotOnEdge(NetworkError):
    pass


def edge_label(edge: Edge) -> str:
    return f"{edge[0]}>{edge[1]}"


def parse_edge(text: str) -> Edge:
    tail, sep, head = text.strip().partition(">")
    if not sep or not tail or not head or ">" in head:
        raise InvalidSpec(f"malformed edge {text!r}, expected 'tail>head'")
    return (tail.strip(), head.strip())


@dataclass(frozen=True)
class AffineForm:
    """``constant + sum(coefficient * z)`` over the transit pairs entering a node.

    Pairs missing from ``coefficients`` get ``default_coefficient``.
    """

    constant: float
    coefficients: Mapping[Pair, float] = field(default_factory=dict)
    default_coefficient: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coefficients", MappingProxyType(dict(sorted(self.coefficients.items()))))
        if not self.constant >= 0:
            raise InvalidSpec(f"affine form constant must be >= 0, got {self.constant}")
        if not self.default_coefficient >= 0 or any(not c >= 0 for c in self.coefficients.values()):
            raise InvalidSpec("affine form coefficients must be >= 0")

    def coefficient(self, pair: Pair) -> float:
        return self.coefficients.get(pair, self.default_coefficient)

    def __eq__(self, other):
        if not isinstance(other, AffineForm):
            return NotImplemented
        return (
            self.constant == other.constant
            and dict(self.coefficients) == dict(other.coefficients)
            and self.default_coefficient == other.default_coefficient
        )

    def __hash__(self):
        return hash((self.constant, tuple(self.coefficients.items()), self.default_coefficient))


@dataclass(frozen=True)
class Node:
    """An output port modelled as a rate-latency server for its class."""

    id: str
    rate: float
    latency: float
    packetization: float | None = None
    extra_delay_bounds: tuple[AffineForm, ...] = ()
    line_rate: float | None = None
    max_packet: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "extra_delay_bounds", tuple(self.extra_delay_bounds))

    @property
    def packetization_delay(self) -> float:
        """Explicit packetization delay, else ``max_packet / line_rate`` when both are set, else 0."""
        if self.packetization is not None:
            return self.packetization
        if self.line_rate is not None and self.max_packet is not None:
            return self.max_packet / self.line_rate
        return 0.0


@dataclass(frozen=True)
class Flow:
    id: str
    rate: float
    burst: float
    path: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(self.path))

    @property
    def source(self) -> str:
        return self.path[0]


@dataclass(frozen=True)
class StabilityEntry:
    node: str
    utilization: float
    stable: bool


class Network:
    """Validated, immutable network with the derived transit-edge structure.

    Use :func:`build_network` (or :func:`tfa.netfile.load_network`) to create one.
    """

    def __init__(self, nodes: Mapping[str, Node], flows: Mapping[str, Flow]):
        self._nodes = MappingProxyType(dict(sorted(nodes.items())))
        self._flows = MappingProxyType(dict(sorted(flows.items())))
        carried: dict[Edge, list[str]] = {}
        for f in self._flows.values():
            for a, b in zip(f.path, f.path[1:]):
                carried.setdefault((a, b), []).append(f.id)
        self._edge_flows = MappingProxyType({e: tuple(sorted(fs)) for e, fs in sorted(carried.items())})
        self._pairs = tuple((e, f) for e, fs in self._edge_flows.items() for f in fs)

    # -- basic collections -------------------------------------------------

    @property
    def nodes(self) -> Mapping[str, Node]:
        return self._nodes

    @property
    def flows(self) -> Mapping[str, Flow]:
        return self._flows

    @cached_property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(self._nodes)

    @cached_property
    def node_index(self) -> Mapping[str, int]:
        return MappingProxyType({n: k for k, n in enumerate(self.node_ids)})

    @property
    def edges(self) -> tuple[Edge, ...]:
        """Transit edges in canonical order."""
        return tuple(self._edge_flows)

    @property
    def edge_flows(self) -> Mapping[Edge, tuple[str, ...]]:
        return self._edge_flows

    @property
    def pairs(self) -> tuple[Pair, ...]:
        """Every (transit edge, flow) component, ordered by edge then flow."""
        return self._pairs

    @cached_property
    def pair_index(self) -> Mapping[Pair, int]:
        return MappingProxyType({p: k for k, p in enumerate(self._pairs)})

    def __len__(self) -> int:
        return len(self._nodes)

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return dict(self._nodes) == dict(other._nodes) and dict(self._flows) == dict(other._flows)

    def __hash__(self):
        return hash((tuple(self._nodes.items()), tuple(self._flows.items())))

    def __repr__(self):
        return f"<Network: {len(self._nodes)} nodes, {len(self._flows)} flows, {len(self._edge_flows)} transit edges>"

    # -- set operators -------------------------------------------------------

    @cached_property
    def _inc(self) -> Mapping[str, tuple[Edge, ...]]:
        table: dict[str, list[Edge]] = {n: [] for n in self._nodes}
        for e in self._edge_flows:
            table[e[1]].append(e)
        return MappingProxyType({n: tuple(es) for n, es in table.items()})

    @cached_property
    def _out(self) -> Mapping[str, tuple[Edge, ...]]:
        table: dict[str, list[Edge]] = {n: [] for n in self._nodes}
        for e in self._edge_flows:
            table[e[0]].append(e)
        return MappingProxyType({n: tuple(es) for n, es in table.items()})

    def _check_node(self, i: str) -> None:
        if i not in self._nodes:
            raise UnknownNode(f"unknown node {i!r}")

    def inc(self, i: str) -> tuple[Edge, ...]:
        self._check_node(i)
        return self._inc[i]

    def out(self, i: str) -> tuple[Edge, ...]:
        self._check_node(i)
        return self._out[i]

    def inc_pairs(self, i: str) -> tuple[Pair, ...]:
        return tuple((e, f) for e in self.inc(i) for f in self._edge_flows[e])

    def out_pairs(self, i: str) -> tuple[Pair, ...]:
        return tuple((e, f) for e in self.out(i) for f in self._edge_flows[e])

    def fresh_flows(self, i: str) -> tuple[str, ...]:
        self._check_node(i)
        return tuple(f.id for f in self._flows.values() if f.path[0] == i)

    def crossing_flows(self, i: str) -> tuple[str, ...]:
        self._check_node(i)
        return tuple(f.id for f in self._flows.values() if i in f.path)

    def pred_f(self, edge: Edge, flow: str) -> frozenset[str]:
        """Nodes of ``flow``'s path upstream of ``edge``, the edge's tail included."""
        edge = tuple(edge)
        if edge not in self._edge_flows:
            raise EdgeNotTransit(f"{edge_label(edge)} is not a transit edge")
        if flow not in self._edge_flows[edge]:
            raise FlowNotOnEdge(f"flow {flow!r} does not cross {edge_label(edge)}")
        path = self._flows[flow].path
        return frozenset(path[: path.index(edge[0]) + 1])

    def pred(self, edge: Edge) -> frozenset[str]:
        edge = tuple(edge)
        if edge not in self._edge_flows:
            raise EdgeNotTransit(f"{edge_label(edge)} is not a transit edge")
        return frozenset().union(*(self.pred_f(edge, f) for f in self._edge_flows[edge]))

    def upstream_pair(self, pair: Pair) -> Pair | None:
        """The pair carrying the same flow into the edge's tail, or None if the flow is fresh there."""
        (tail, _), flow = pair
        path = self._flows[flow].path
        k = path.index(tail)
        if k == 0:
            return None
        return ((path[k - 1], tail), flow)

    def path_pairs(self, flow: str) -> tuple[Pair, ...]:
        path = self._flows[flow].path
        return tuple(((a, b), flow) for a, b in zip(path, path[1:]))

    # -- graph queries -------------------------------------------------------

    def successors(self, i: str, removed: Iterable[Edge] = ()) -> list[str]:
        removed = set(removed)
        return [e[1] for e in self.out(i) if e not in removed]

    def is_cyclic(self) -> bool:
        return topological_order(self.node_ids, self.edges) is None

    def check_local_stability(self) -> list[StabilityEntry]:
        return check_local_stability(self)


def topological_order(nodes: Sequence[str], edges: Iterable[Edge]) -> tuple[str, ...] | None:
    """Kahn's algorithm taking the smallest available id first; None if a cycle remains."""
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    indeg = {n: 0 for n in nodes}
    for a, b in edges:
        succ[a].append(b)
        indeg[b] += 1
    heap = [n for n in nodes if indeg[n] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        n = heapq.heappop(heap)
        order.append(n)
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(heap, m)
    if len(order) != len(indeg):
        return None
    return tuple(order)


def check_local_stability(net: Network) -> list[StabilityEntry]:
    """Per-node utilization ``sum(r_f) / R`` over the flows crossing each node."""
    load = {n: 0.0 for n in net.node_ids}
    for f in net.flows.values():
        for n in f.path:
            load[n] += f.rate
    report = []
    for n in net.node_ids:
        u = load[n] / net.nodes[n].rate
        report.append(StabilityEntry(n, u, u <= 1.0))
    return report


def is_locally_stable(net: Network) -> bool:
    return all(e.stable for e in check_local_stability(net))


def _validate_node(node: Node) -> None:
    where = f"node {node.id}"
    if not node.rate > 0:
        raise NonPositiveRate(f"service rate must be > 0, got {node.rate}", where=where)
    if not node.latency >= 0:
        raise InvalidSpec(f"latency must be >= 0, got {node.latency}", where=where)
    if node.packetization is not None and not node.packetization >= 0:
        raise InvalidSpec(f"packetization delay must be >= 0, got {node.packetization}", where=where)
    for name in ("line_rate", "max_packet"):
        value = getattr(node, name)
        if value is not None and not value > 0:
            raise NonPositiveRate(f"{name} must be > 0, got {value}", where=where)
    if not node.latency + node.packetization_delay > 0:
        raise ZeroJitterFloor("latency + packetization delay must be > 0", where=where)
    for form in node.extra_delay_bounds:
        if not form.constant > 0:
            raise ZeroJitterFloor("extra delay bound has a zero constant", where=where)


def _validate_flow(flow: Flow, nodes: Mapping[str, Node]) -> None:
    where = f"flow {flow.id}"
    if not flow.rate > 0:
        raise NonPositiveRate(f"flow rate must be > 0, got {flow.rate}", where=where)
    if not flow.burst > 0:
        raise NonPositiveRate(f"flow burst must be > 0, got {flow.burst}", where=where)
    if len(flow.path) == 0:
        raise InvalidSpec("flow path is empty", where=where)
    seen = set()
    for n in flow.path:
        if n not in nodes:
            raise UnknownNode(f"path references unknown node {n!r}", where=where)
        if n in seen:
            raise DuplicatePathNode(f"path visits node {n!r} twice", where=where)
        seen.add(n)


def build_network(nodes: Iterable[Node], flows: Iterable[Flow]) -> Network:
    """Validate nodes and flows and derive the transit-edge structure."""
    node_map: dict[str, Node] = {}
    for node in nodes:
        if node.id in node_map:
            raise InvalidSpec(f"duplicate node id {node.id!r}")
        _validate_node(node)
        node_map[node.id] = node
    flow_map: dict[str, Flow] = {}
    for flow in flows:
        if flow.id in flow_map:
            raise InvalidSpec(f"duplicate flow id {flow.id!r}")
        _validate_flow(flow, node_map)
        flow_map[flow.id] = flow
    net = Network(node_map, flow_map)
    for node in net.nodes.values():
        allowed = set(net.inc_pairs(node.id))
        for form in node.extra_delay_bounds:
            stray = [p for p in form.coefficients if p not in allowed]
            if stray:
                (e, f) = stray[0]
                raise InvalidSpec(
                    f"extra delay bound refers to ({edge_label(e)}, {f}), which does not enter the node",
                    where=f"node {node.id}",
                )
    return net
