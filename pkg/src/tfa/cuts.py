"""Cuts that break every cycle of the induced graph, and feedforward labelings.

``inc`` and ``out`` always refer to the original, uncut graph.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

from tfa.model import Edge, EdgeNotTransit, Network, NetworkError, edge_label, parse_edge, topological_order

EXHAUSTIVE_LIMIT = 20

_STRATEGIES = {
    "dfs": "dfs-back-edges",
    "dfs-back-edges": "dfs-back-edges",
    "min": "exhaustive-min",
    "exhaustive-min": "exhaustive-min",
    "user": "user",
}


class NotACut(NetworkError):
    pass


class TooLargeForExhaustive(NetworkError):
    pass


@dataclass(frozen=True)
class Cut:
    edges: frozenset[Edge]
    strategy: str = "user"

    def __iter__(self):
        return iter(sorted(self.edges))

    def __len__(self):
        return len(self.edges)

    def label(self) -> str:
        return ",".join(edge_label(e) for e in sorted(self.edges))


@dataclass(frozen=True)
class Labeling:
    order: tuple[str, ...]


def parse_cut(text: str) -> frozenset[Edge]:
    """Parse ``"A>B,C>D"``; an empty string is the empty cut."""
    return frozenset(parse_edge(t) for t in text.split(",") if t.strip())


def is_acyclic_without(net: Network, removed: Iterable[Edge]) -> bool:
    removed = set(removed)
    return topological_order(net.node_ids, (e for e in net.edges if e not in removed)) is not None


def dfs_back_edges(net: Network) -> frozenset[Edge]:
    """Back edges of a depth-first traversal visiting roots and successors in id order."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in net.node_ids}
    back = set()
    for root in net.node_ids:
        if color[root] != WHITE:
            continue
        color[root] = GREY
        stack = [(root, iter(sorted(net.successors(root))))]
        while stack:
            node, it = stack[-1]
            for nxt in it:
                if color[nxt] == GREY:
                    back.add((node, nxt))
                elif color[nxt] == WHITE:
                    color[nxt] = GREY
                    stack.append((nxt, iter(sorted(net.successors(nxt)))))
                    break
            else:
                color[node] = BLACK
                stack.pop()
    return frozenset(back)


def _cyclic_edges(net: Network) -> list[Edge]:
    """Edges lying on some cycle, i.e. inside a strongly connected component."""
    # iterative Tarjan
    index, low, on_stack, comp = {}, {}, set(), {}
    stack, counter = [], 0
    for root in net.node_ids:
        if root in index:
            continue
        work = [(root, iter(sorted(net.successors(root))))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter
                    counter += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(sorted(net.successors(nxt)))))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                while True:
                    m = stack.pop()
                    on_stack.discard(m)
                    comp[m] = node
                    if m == node:
                        break
    return [e for e in net.edges if comp[e[0]] == comp[e[1]]]


def exhaustive_min_cut(net: Network) -> frozenset[Edge]:
    if len(net.edges) > EXHAUSTIVE_LIMIT:
        raise TooLargeForExhaustive(
            f"exhaustive search allowed for at most {EXHAUSTIVE_LIMIT} transit edges, network has {len(net.edges)}"
        )
    candidates = _cyclic_edges(net)
    for size in range(len(candidates) + 1):
        for subset in combinations(candidates, size):
            if is_acyclic_without(net, subset):
                return frozenset(subset)
    raise AssertionError("removing every cyclic edge must leave an acyclic graph")


def find_cut(net: Network, strategy: str = "dfs", edges: Iterable[Edge] | None = None) -> Cut:
    try:
        tag = _STRATEGIES[strategy]
    except KeyError:
        raise ValueError(f"unknown cut strategy {strategy!r}") from None
    if tag == "dfs-back-edges":
        found = dfs_back_edges(net)
    elif tag == "exhaustive-min":
        found = exhaustive_min_cut(net)
    else:
        if edges is None:
            raise ValueError("the user strategy needs an explicit edge set")
        found = frozenset(tuple(e) for e in edges)
        for e in found:
            if e not in net.edge_flows:
                raise EdgeNotTransit(f"{edge_label(e)} is not a transit edge")
        if not is_acyclic_without(net, found):
            raise NotACut(f"removing {{{','.join(edge_label(e) for e in sorted(found))}}} leaves a cycle")
    return Cut(found, tag)


def _edges(cut: Cut | Iterable[Edge]) -> frozenset[Edge]:
    return cut.edges if isinstance(cut, Cut) else frozenset(tuple(e) for e in cut)


def feedforward_labeling(net: Network, cut: Cut | Iterable[Edge]) -> Labeling:
    """Topological order of the cut graph, lowest id first among available nodes."""
    removed = _edges(cut)
    order = topological_order(net.node_ids, (e for e in net.edges if e not in removed))
    if order is None:
        raise NotACut("the cut leaves a cycle")
    return Labeling(order)


def validate_labeling(net: Network, cut: Cut | Iterable[Edge], order: Sequence[str]) -> bool:
    """Every node's incoming transit edges are cut or leave an earlier-labeled node."""
    if sorted(order) != sorted(net.node_ids) or len(set(order)) != len(order):
        return False
    allowed = set(_edges(cut))
    for node in order:
        if not set(net.inc(node)) <= allowed:
            return False
        allowed.update(net.out(node))
    return True
