"""Independent ground truth for the affine delay model.

When every node has a single delay form, ``G`` is the affine map
``x -> A x + c`` over ``x = (d, z)``; its fixpoint is the solution of
``(I - A) x = c`` when the spectral radius of ``A`` is below one, and the
increasing iteration from zero diverges otherwise.

None of this goes through the solver kernels: the matrix is assembled from the
network description directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from tfa.calculus import GlobalMap, State, default_delay_model, global_map
from tfa.model import Network, NetworkError


class NotAffine(NetworkError):
    pass


class SingularSystem(ArithmeticError):
    pass


class NoConvergence(ArithmeticError):
    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True, eq=False)
class AffineSystem:
    """``x = A x + c`` with ``x`` = all delays, then all burstinesses, in canonical order."""

    net: Network
    A: np.ndarray
    c: np.ndarray
    valid: bool = True

    @property
    def n_nodes(self) -> int:
        return len(self.net.node_ids)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x + self.c

    def split(self, x: np.ndarray) -> State:
        n = self.n_nodes
        return State(self.net.pairs, self.net.node_ids, np.asarray(x[n:], float), np.asarray(x[:n], float))


def _assemble(net: Network, form_of_node) -> AffineSystem:
    n, m = len(net.node_ids), len(net.pairs)
    A = np.zeros((n + m, n + m))
    c = np.zeros(n + m)
    nidx, pidx = net.node_index, net.pair_index
    for node_id in net.node_ids:
        i = nidx[node_id]
        model = default_delay_model(net.nodes[node_id], net)
        form = form_of_node(node_id, model)
        c[i] = form.constant
        for p in model.inputs:
            A[i, n + pidx[p]] = form.coefficient(p)
    for pair in net.pairs:
        j = n + pidx[pair]
        flow = net.flows[pair[1]]
        c[j] = flow.burst
        for u in net.pred_f(*pair):
            A[j, nidx[u]] = flow.rate
    return AffineSystem(net, A, c, True)


def linearize(net: Network) -> AffineSystem:
    def only_form(node_id, model):
        if len(model.forms) != 1:
            raise NotAffine(f"node {node_id} has {len(model.forms)} delay forms")
        return model.forms[0]

    return _assemble(net, only_form)


def spectral_radius(A: np.ndarray, max_steps: int = 10_000, tol: float = 1e-10) -> float:
    """Dominant eigenvalue of a nonnegative matrix by power iteration from the all-ones vector.

    The iteration runs on ``A + I`` so that periodic matrices (the delay /
    burstiness system alternates between two blocks) do not oscillate; the
    estimate is the Collatz-Wielandt upper bound ``max (Bx)_i / x_i``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("spectral_radius needs a square matrix")
    if np.any(A < 0):
        raise ValueError("spectral_radius needs a nonnegative matrix")
    size = A.shape[0]
    if size == 0:
        return 0.0
    # nilpotent (acyclic dependencies): A^size 1 vanishes exactly
    x = np.ones(size)
    for _ in range(size):
        x = A @ x
        top = x.max()
        if top == 0.0:
            return 0.0
        x /= top
    B = A + np.eye(size)
    x = np.ones(size)
    prev = np.inf
    lam = np.inf
    for _ in range(max_steps):
        y = B @ x
        lam = float(np.max(y / x))
        y /= y.max()
        if abs(lam - prev) <= tol * lam:
            return max(lam - 1.0, 0.0)
        prev, x = lam, y
    raise NoConvergence(f"power iteration did not settle in {max_steps} steps", max(lam - 1.0, 0.0))


@dataclass(frozen=True, eq=False)
class Fixpoint:
    """Outcome of :func:`exact_fixpoint`: ``x`` is None when no finite fixpoint exists."""

    rho: float
    x: np.ndarray | None
    residual: float | None = None
    reason: str | None = None

    @property
    def unique(self) -> bool:
        return self.x is not None


def exact_fixpoint(sys: AffineSystem, rho: float | None = None) -> Fixpoint:
    if not sys.valid:
        raise NotAffine("the affine system is not valid for this network")
    if rho is None:
        rho = spectral_radius(sys.A)
    if rho >= 1.0:
        return Fixpoint(rho, None, None, f"spectral radius {rho:.6g} >= 1: low set unbounded, no finite fixpoint")
    M = np.eye(sys.A.shape[0]) - sys.A
    try:
        x = np.linalg.solve(M, sys.c)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"I - A is singular although rho = {rho:.6g} < 1") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem(f"I - A is numerically singular (rho = {rho:.6g})")
    return Fixpoint(rho, x, _scaled_residual(sys.apply(x), x))


def _scaled_residual(fx: np.ndarray, x: np.ndarray) -> float:
    scale = np.maximum(np.abs(x), np.finfo(float).tiny)
    return float(np.max(np.abs(fx - x) / scale)) if x.size else 0.0


def oracle_state(net: Network) -> tuple[Fixpoint, State | None]:
    sys = linearize(net)
    fp = exact_fixpoint(sys)
    return fp, (sys.split(fp.x) if fp.unique else None)


def is_in_low_G(net: Network, state: State, rtol: float = 0.0) -> bool:
    """``state <= G(state)`` componentwise (up to ``rtol`` relative slack)."""
    return state.leq(global_map(net).G(state), rtol=rtol)


@dataclass
class LargestElementReport:
    checked: int = 0
    in_low: int = 0
    violations: int = 0


def largest_element_check(
    net: Network, samples: Iterable[State], fixpoint: State, rtol: float = 1e-9, low_rtol: float = 0.0
) -> LargestElementReport:
    """Count samples that lie in low(G) but exceed the fixpoint (there must be none)."""
    report = LargestElementReport()
    for s in samples:
        report.checked += 1
        if is_in_low_G(net, s, rtol=low_rtol):
            report.in_low += 1
            if not s.leq(fixpoint, rtol=rtol):
                report.violations += 1
    return report


def policy_fixpoint(net: Network, max_rounds: int = 1000) -> Fixpoint:
    """Fixpoint of ``G`` when delay models are minima of several affine forms.

    Policy iteration: fix one form per node, solve the affine system, then switch
    every node to its smallest form at that solution. Starting from a policy with
    spectral radius below one, the fixpoints decrease and stop at a policy that is
    active at its own fixpoint, which is then the fixpoint of ``G``. Returns a
    Fixpoint without ``x`` when no starting policy with radius below one is found;
    that does not prove divergence.
    """
    gm: GlobalMap = global_map(net)
    models = gm.models

    def system(policy):
        return _assemble(net, lambda node_id, model: model.forms[policy[net.node_index[node_id]]])

    def coef_mass(form, model):
        return sum(form.coefficient(p) for p in model.inputs)

    starts = [
        tuple(min(range(len(m.forms)), key=lambda k: (coef_mass(m.forms[k], m), k)) for m in models),
        tuple(0 for _ in models),
    ]
    rho = np.inf
    for policy in starts:
        sys = system(policy)
        rho = spectral_radius(sys.A)
        if rho < 1.0:
            break
    else:
        return Fixpoint(rho, None, None, "no starting policy with spectral radius below one")
    for _ in range(max_rounds):
        fp = exact_fixpoint(sys, rho)
        x = fp.x
        zv = x[len(models):]
        new_policy = []
        for k, m in enumerate(models):
            values = [f.constant + sum(f.coefficient(p) * zv[net.pair_index[p]] for p in m.inputs) for f in m.forms]
            best = min(values)
            new_policy.append(policy[k] if values[policy[k]] <= best else values.index(best))
        new_policy = tuple(new_policy)
        if new_policy == policy:
            state = State(net.pairs, net.node_ids, x[len(models):], x[: len(models)])
            exact = gm.G(state).vector()
            return Fixpoint(rho, x, _scaled_residual(exact, x))
        policy = new_policy
        sys = system(policy)
        rho = spectral_radius(sys.A)
    raise NoConvergence("policy iteration did not stabilise", rho)
