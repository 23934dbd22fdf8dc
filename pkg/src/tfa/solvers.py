"""The four TFA iteration schedules over the same maps D and Z.

* SyncTFA: ``(z, d) <- G(z, d)``.
* AsyncTFA: per round, the selected nodes update their delay, then the
  burstinesses leaving them; the new burstinesses are committed at round end.
* AltTFA: ``d <- D(z); z <- Z(d)``.
* FP-TFA: iterate the burstinesses on a cut through one feedforward sweep.

All start from zero and produce wide-sense increasing iterates. A solver stops
when one iteration changes no component by more than
``eps_abs + eps_rel * |value|`` and the residual of ``G`` meets the same bound.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Sequence, TextIO

import numpy as np

from tfa import kernels
from tfa.calculus import GlobalMap, IndexMismatch, State, global_map
from tfa.cuts import Cut, Labeling, NotACut, feedforward_labeling, find_cut, validate_labeling
from tfa.model import Edge, Network, NetworkError, Pair, check_local_stability, edge_label

ALGORITHMS = ("sync", "async", "alt", "fptfa")


class UnstableNetwork(NetworkError):
    pass


class ScheduleViolatesHD(NetworkError):
    pass


class MonotonicityViolation(AssertionError):
    pass


class Status(str, enum.Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    ITERATION_LIMIT = "iteration-limit"


EXIT_CODES = {Status.CONVERGED: 0, Status.DIVERGED: 2, Status.ITERATION_LIMIT: 3}


@dataclass(frozen=True)
class SolveOptions:
    eps_rel: float = 1e-9
    eps_abs: float = 1e-12
    max_iters: int = 100_000
    divergence_cap: float = 1e15

    def __post_init__(self):
        for name in ("eps_rel", "eps_abs", "max_iters", "divergence_cap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def within(self, delta: np.ndarray, value: np.ndarray) -> bool:
        return bool(np.all(np.abs(delta) <= self.eps_abs + self.eps_rel * np.abs(value)))


@dataclass
class SolverOutcome:
    algorithm: str
    status: Status
    state: State
    iterations: int
    node_updates: int
    trace: list[State] | None = None
    cause: str | None = None
    label: str = ""

    def __post_init__(self):
        if not self.label:
            self.label = self.algorithm

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    @property
    def diverged(self) -> bool:
        return self.status is Status.DIVERGED

    def end_to_end(self, net: Network) -> dict[str, float]:
        return global_map(net).end_to_end(self.state.d)


# -- schedules ---------------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    """Which nodes AsyncTFA updates in each round.

    ``round-robin`` visits every node alone in id order; ``random-permutation``
    draws a fresh order of singleton rounds each epoch; ``user-list`` cycles the
    given rounds; ``all`` updates every node in one round.
    """

    kind: str = "round-robin"
    seed: int | None = None
    rounds: tuple[tuple[str, ...], ...] = ()

    @classmethod
    def parse(cls, text: str) -> Schedule:
        text = text.strip()
        if text in ("rr", "round-robin"):
            return cls("round-robin")
        if text == "all":
            return cls("all")
        if text.startswith("random:"):
            return cls("random-permutation", seed=int(text.split(":", 1)[1]))
        if text.startswith("user:"):
            body = text.split(":", 1)[1]
            rounds = tuple(tuple(n for n in r.split("+") if n) for r in body.split(",") if r)
            return cls("user-list", rounds=rounds)
        raise ValueError(f"unknown schedule {text!r}; use rr, all, random:<seed> or user:<A+B,C,...>")

    @property
    def label(self) -> str:
        if self.kind == "random-permutation":
            return f"random:{self.seed}"
        if self.kind == "user-list":
            return "user:" + ",".join("+".join(r) for r in self.rounds)
        return {"round-robin": "rr"}.get(self.kind, self.kind)

    def check_hd(self, net: Network) -> None:
        if self.kind != "user-list":
            return
        unknown = {n for r in self.rounds for n in r} - set(net.node_ids)
        if unknown:
            raise ScheduleViolatesHD(f"schedule names unknown node(s) {sorted(unknown)}")
        missing = set(net.node_ids) - {n for r in self.rounds for n in r}
        if missing:
            raise ScheduleViolatesHD(f"node(s) {sorted(missing)} never visited by the schedule")

    def epochs(self, net: Network) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yield ``(round_ptr, round_nodes)`` arrays; every epoch visits every node."""
        self.check_hd(net)
        n = len(net.node_ids)
        idx = net.node_index
        if self.kind == "random-permutation":
            rng = np.random.default_rng(self.seed)
            ptr = np.arange(n + 1, dtype=np.intp)
            while True:
                yield ptr, rng.permutation(n).astype(np.intp)
        if self.kind == "round-robin":
            ptr, nodes = np.arange(n + 1, dtype=np.intp), np.arange(n, dtype=np.intp)
        elif self.kind == "all":
            ptr, nodes = np.array([0, n], dtype=np.intp), np.arange(n, dtype=np.intp)
        elif self.kind == "user-list":
            ptr = np.cumsum([0] + [len(r) for r in self.rounds]).astype(np.intp)
            nodes = np.array([idx[m] for r in self.rounds for m in r], dtype=np.intp)
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        while True:
            yield ptr, nodes


# -- shared driver -------------------------------------------------------------


def _require_stable(net: Network) -> None:
    bad = [e for e in check_local_stability(net) if not e.stable]
    if bad:
        desc = ", ".join(f"{e.node} ({e.utilization:.3g})" for e in bad)
        raise UnstableNetwork(f"local stability fails at {desc}")


def _residual_ok(gm: GlobalMap, z: np.ndarray, d: np.ndarray, opts: SolveOptions) -> bool:
    return opts.within(gm.Z(d) - z, z) and opts.within(gm.D(z) - d, d)


def _iterate(
    net: Network,
    opts: SolveOptions,
    algorithm: str,
    step: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray, int]],
    trace: bool,
    label: str = "",
) -> SolverOutcome:
    gm = global_map(net)
    z, d = np.zeros(gm.n_pairs), np.zeros(gm.n_nodes)
    states = [gm.state(z.copy(), d.copy())] if trace else None
    updates = 0

    def finish(status, k, cause=None):
        return SolverOutcome(algorithm, status, gm.state(z, d), k, updates, states, cause, label)

    for k in range(1, opts.max_iters + 1):
        z_new, d_new, u = step(z, d)
        updates += u
        if np.any(z_new < z) or np.any(d_new < d):
            raise MonotonicityViolation(f"{algorithm}: iterate {k} decreased a component")
        if states is not None:
            states.append(gm.state(z_new.copy(), d_new.copy()))
        stalled = opts.within(z_new - z, z_new) and opts.within(d_new - d, d_new)
        z, d = z_new, d_new
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(d))):
            return finish(Status.DIVERGED, k, "non-finite component")
        if z.size and z.max() > opts.divergence_cap:
            return finish(Status.DIVERGED, k, f"burstiness exceeded {opts.divergence_cap:g} bits")
        if stalled and _residual_ok(gm, z, d, opts):
            return finish(Status.CONVERGED, k)
    return finish(Status.ITERATION_LIMIT, opts.max_iters, "iteration limit reached")


def run_sync(net: Network, opts: SolveOptions = SolveOptions(), trace: bool = False) -> SolverOutcome:
    _require_stable(net)
    gm = global_map(net)
    kern = kernels.backend()

    def step(z, d):
        z_out, d_out = np.empty_like(z), np.empty_like(d)
        kern.sync_step(gm, z, d, z_out, d_out)
        return z_out, d_out, gm.n_nodes

    return _iterate(net, opts, "sync", step, trace)


def run_alt(net: Network, opts: SolveOptions = SolveOptions(), trace: bool = False) -> SolverOutcome:
    _require_stable(net)
    gm = global_map(net)
    kern = kernels.backend()

    def step(z, d):
        z, d = z.copy(), d.copy()
        kern.alt_round(gm, z, d)
        return z, d, gm.n_nodes

    return _iterate(net, opts, "alt", step, trace)


def run_async(
    net: Network,
    schedule: Schedule | str = "rr",
    opts: SolveOptions = SolveOptions(),
    trace: bool = False,
) -> SolverOutcome:
    """AsyncTFA; one reported iteration is one epoch of the schedule."""
    if isinstance(schedule, str):
        schedule = Schedule.parse(schedule)
    _require_stable(net)
    schedule.check_hd(net)
    gm = global_map(net)
    kern = kernels.backend()
    epochs = schedule.epochs(net)
    zbuf = np.zeros(gm.n_pairs)

    def step(z, d):
        ptr, nodes = next(epochs)
        z, d = z.copy(), d.copy()
        u = kern.async_epoch(gm, ptr, nodes, z, d, zbuf)
        return z, d, u

    return _iterate(net, opts, "async", step, trace, label=f"async[{schedule.label}]")


# -- FP-TFA --------------------------------------------------------------------


def _resolve_cut(net: Network, cut: Cut | Iterable[Edge] | str | None) -> Cut:
    if cut is None:
        return find_cut(net, "dfs")
    if isinstance(cut, str):
        return find_cut(net, cut)
    if isinstance(cut, Cut):
        if cut.strategy != "user":
            return cut
        return find_cut(net, "user", cut.edges)
    return find_cut(net, "user", cut)


class _Sweep:
    """Array form of FPTFAiter for one cut and labeling."""

    def __init__(self, net: Network, cut: Cut, labeling: Labeling):
        self.gm = global_map(net)
        self.order = np.array([net.node_index[n] for n in labeling.order], dtype=np.intp)
        self.mask = np.array([p[0] in cut.edges for p in net.pairs], dtype=np.uint8)
        self.cut_idx = np.flatnonzero(self.mask)

    def __call__(self, z_seed: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        z = np.zeros(self.gm.n_pairs)
        z[self.cut_idx] = z_seed[self.cut_idx]
        zp = np.zeros(self.gm.n_pairs)
        d = np.zeros(self.gm.n_nodes)
        kernels.backend().fptfa_sweep(self.gm, self.order, self.mask, z, zp, d)
        return z, zp, d


def fptfa_iter(
    net: Network,
    cut: Cut | Iterable[Edge],
    labeling: Labeling | Sequence[str],
    z_L: Mapping[Pair, float],
) -> tuple[dict[Pair, float], dict[Pair, float], dict[str, float]]:
    """One feedforward sweep seeded with the cut burstinesses ``z_L``.

    Returns ``(z'_L, z on the uncut edges, d)``.
    """
    cut = _resolve_cut(net, cut)
    order = labeling.order if isinstance(labeling, Labeling) else tuple(labeling)
    if not validate_labeling(net, cut, order):
        raise NotACut("labeling does not satisfy the feedforward conditions for this cut")
    cut_pairs = [p for p in net.pairs if p[0] in cut.edges]
    if set(z_L) != set(cut_pairs):
        raise IndexMismatch("z_L must cover exactly the pairs on the cut edges")
    sweep = _Sweep(net, cut, Labeling(order))
    seed = np.zeros(len(net.pairs))
    for p, v in z_L.items():
        seed[net.pair_index[p]] = v
    z, zp, d = sweep(seed)
    zl, zpl = z.tolist(), zp.tolist()
    z_prime = {p: zpl[k] for k, p in enumerate(net.pairs) if sweep.mask[k]}
    z_rest = {p: zl[k] for k, p in enumerate(net.pairs) if not sweep.mask[k]}
    return z_prime, z_rest, dict(zip(net.node_ids, d.tolist()))


def run_fptfa(
    net: Network,
    cut: Cut | Iterable[Edge] | str | None = None,
    opts: SolveOptions = SolveOptions(),
    trace: bool = False,
    labeling: Labeling | None = None,
) -> SolverOutcome:
    """FP-TFA: outer iteration on the cut burstinesses, one sweep per iteration.

    Convergence is tested on the cut burstinesses; the reported state comes from
    the sweep seeded with the converged cut values.
    """
    _require_stable(net)
    cut = _resolve_cut(net, cut)
    if labeling is None:
        labeling = feedforward_labeling(net, cut)
    elif not validate_labeling(net, cut, labeling.order):
        raise NotACut("labeling does not satisfy the feedforward conditions for this cut")
    sweep = _Sweep(net, cut, labeling)
    gm = sweep.gm
    ci = sweep.cut_idx
    label = f"fptfa[{cut.label() or 'empty'}]"

    z_seed = np.zeros(gm.n_pairs)
    prev = gm.zero()
    states = [prev] if trace else None
    updates = 0
    for k in range(1, opts.max_iters + 1):
        z, zp, d = sweep(z_seed)
        updates += gm.n_nodes
        cur = gm.state(z, d)
        if np.any(z < prev.z) or np.any(d < prev.d):
            raise MonotonicityViolation(f"fptfa: iterate {k} decreased a component")
        if states is not None:
            states.append(cur)
        prev = cur
        if not (np.all(np.isfinite(zp[ci])) and cur.is_finite()):
            return SolverOutcome("fptfa", Status.DIVERGED, cur, k, updates, states, "non-finite component", label)
        top = max(zp[ci].max() if ci.size else 0.0, z.max() if z.size else 0.0)
        if top > opts.divergence_cap:
            cause = f"burstiness exceeded {opts.divergence_cap:g} bits"
            return SolverOutcome("fptfa", Status.DIVERGED, cur, k, updates, states, cause, label)
        if opts.within(zp[ci] - z_seed[ci], zp[ci]) and _residual_ok(gm, z, d, opts):
            return SolverOutcome("fptfa", Status.CONVERGED, cur, k, updates, states, None, label)
        z_seed = zp
    return SolverOutcome(
        "fptfa", Status.ITERATION_LIMIT, prev, opts.max_iters, updates, states, "iteration limit reached", label
    )


# -- comparison ------------------------------------------------------------------


@dataclass
class ComparisonReport:
    network: Network
    runs: list[SolverOutcome] = field(default_factory=list)

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.runs)

    @property
    def all_diverged(self) -> bool:
        return all(r.diverged for r in self.runs)

    def bounds(self) -> dict[str, dict[str, float]]:
        return {r.label: r.end_to_end(self.network) for r in self.runs}

    def max_pairwise_rel_diff(self) -> float:
        """Largest relative gap between two converged runs' end-to-end bounds over all flows."""
        conv = [r.end_to_end(self.network) for r in self.runs if r.converged]
        worst = 0.0
        for a, b in combinations(conv, 2):
            for f in a:
                scale = max(abs(a[f]), abs(b[f]))
                if scale > 0:
                    worst = max(worst, abs(a[f] - b[f]) / scale)
        return worst

    def rows(self) -> list[dict]:
        out = []
        for r in self.runs:
            e2e = r.end_to_end(self.network) if r.converged else {}
            out.append(
                {
                    "run": r.label,
                    "algorithm": r.algorithm,
                    "status": r.status.value,
                    "max_e2e_bound_s": max(e2e.values()) if e2e else float("nan"),
                    "iterations": r.iterations,
                    "node_updates": r.node_updates,
                }
            )
        return out


def compare_algorithms(
    net: Network,
    opts: SolveOptions = SolveOptions(),
    cuts: Sequence[Cut | Iterable[Edge] | str] = ("dfs",),
    schedules: Sequence[Schedule | str] = ("rr",),
    trace: bool = False,
) -> ComparisonReport:
    """Run SyncTFA, AltTFA, FP-TFA once per cut and AsyncTFA once per schedule."""
    report = ComparisonReport(net)
    report.runs.append(run_sync(net, opts, trace))
    for s in schedules:
        report.runs.append(run_async(net, s, opts, trace))
    report.runs.append(run_alt(net, opts, trace))
    for c in cuts:
        report.runs.append(run_fptfa(net, c, opts, trace))
    return report


# -- trace export --------------------------------------------------------------


TRACE_COLUMNS = ("iteration", "kind", "id", "flow_id", "value")


def trace_rows(trace: Sequence[State]) -> Iterator[tuple]:
    for k, st in enumerate(trace):
        for n, v in zip(st.nodes, st.d.tolist()):
            yield (k, "d", n, "", repr(v))
        for (e, f), v in zip(st.pairs, st.z.tolist()):
            yield (k, "z", edge_label(e), f, repr(v))


def write_trace_csv(trace: Sequence[State], dest: str | Path | TextIO) -> None:
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            write_trace_csv(trace, fh)
        return
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    w.writerows(trace_rows(trace))


def trace_csv_text(trace: Sequence[State]) -> str:
    buf = io.StringIO()
    write_trace_csv(trace, buf)
    return buf.getvalue()
