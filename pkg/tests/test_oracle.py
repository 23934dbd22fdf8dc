import numpy as np
import pytest
from hypothesis import given, settings

from tfa import generators
from tfa.calculus import State, eval_G, with_line_shaping
from tfa.model import AffineForm, Flow, Node, build_network, topological_order
from tfa.oracle import (
    NoConvergence,
    NotAffine,
    exact_fixpoint,
    is_in_low_G,
    largest_element_check,
    linearize,
    oracle_state,
    policy_fixpoint,
    spectral_radius,
)
from tfa.solvers import SolveOptions, run_sync

from strategies import networks, random_state, rngs


def test_tandem_is_nilpotent(tandem):
    sys = linearize(tandem)
    # variables in topological order: d_A, z_AB, d_B
    perm = [0, 2, 1]
    P = sys.A[np.ix_(perm, perm)]
    assert np.all(np.triu(P) == 0)
    assert spectral_radius(sys.A) == 0.0


def test_tandem_fixpoint(tandem):
    fp = exact_fixpoint(linearize(tandem))
    assert fp.unique and fp.rho == 0.0
    np.testing.assert_allclose(fp.x, [0.0011, 0.00121, 2100.0], rtol=1e-12)


def test_ring3_matrix_has_cycle():
    M = (linearize(generators.ring(3)).A > 0).astype(int)
    n = M.shape[0]
    walks = sum(np.linalg.matrix_power(M, k) for k in range(1, n + 1))
    assert np.all(np.diag(walks) > 0)


def test_extra_form_is_not_affine():
    net = build_network(
        [Node("A", 1e7, 1e-3, extra_delay_bounds=(AffineForm(5e-4, {}, 0.0),))],
        [Flow("f", 1e5, 1.0, ("A",))],
    )
    with pytest.raises(NotAffine):
        linearize(net)


def test_spectral_radius_small_cases():
    assert spectral_radius(np.array([[0.5]])) == pytest.approx(0.5, rel=1e-10)
    assert spectral_radius(np.zeros((3, 3))) == 0.0
    assert spectral_radius(np.zeros((0, 0))) == 0.0
    swap = np.array([[0.0, 2.0], [0.5, 0.0]])
    assert spectral_radius(swap) == pytest.approx(1.0, rel=1e-9)
    with pytest.raises(ValueError):
        spectral_radius(-np.eye(2))
    with pytest.raises(ValueError):
        spectral_radius(np.ones((2, 3)))


def test_spectral_radius_no_convergence():
    A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]) + 1e-3 * np.random.default_rng(0).random((3, 3))
    with pytest.raises(NoConvergence) as info:
        spectral_radius(A, max_steps=2, tol=1e-16)
    assert info.value.estimate > 0


@settings(max_examples=40, deadline=None)
@given(rngs())
def test_spectral_radius_matches_eigvals(rng):
    A = rng.uniform(0, 1, (6, 6)) * (rng.uniform(0, 1, (6, 6)) < 0.5)
    ref = float(np.max(np.abs(np.linalg.eigvals(A))))
    assert spectral_radius(A) == pytest.approx(ref, rel=1e-6, abs=1e-9)


def test_ring5_oracle():
    fp, xs = oracle_state(generators.ring(5))
    assert fp.unique and fp.rho < 1
    assert fp.residual <= 1e-9
    assert xs is not None and xs.is_finite()


@pytest.mark.parametrize("n", [6, 10, 25])
def test_large_default_rings_have_no_fixpoint(n):
    fp, xs = oracle_state(generators.ring(n))
    assert not fp.unique and fp.rho >= 1 and xs is None
    assert "spectral radius" in fp.reason


def test_radius_does_not_depend_on_latency():
    # T enters only the offset c, never A
    base = spectral_radius(linearize(generators.ring(5)).A)
    for factor in (2, 50):
        assert spectral_radius(linearize(generators.ring(5, T=0.001 * factor)).A) == base


@settings(max_examples=40, deadline=None)
@given(networks(), rngs())
def test_affine_system_reproduces_G(net, rng):
    sys = linearize(net)
    assert np.all(sys.A >= 0) and np.all(sys.c > 0)
    for _ in range(10):
        s = random_state(net, rng)
        np.testing.assert_allclose(sys.apply(s.vector()), eval_G(net, s).vector(), rtol=1e-12)


def test_low_set_membership(ring5):
    fp, xs = oracle_state(ring5)
    assert is_in_low_G(ring5, State.zero(ring5))
    assert is_in_low_G(ring5, xs, rtol=1e-12)
    inflated = State(ring5.pairs, ring5.node_ids, xs.z * 1.01, xs.d * 1.01)
    assert not is_in_low_G(ring5, inflated)


def test_largest_element_on_sync_trace(ring5):
    _, xs = oracle_state(ring5)
    out = run_sync(ring5, SolveOptions(eps_rel=1e-13), trace=True)
    report = largest_element_check(ring5, out.trace, xs, low_rtol=1e-12)
    assert report.checked == len(out.trace)
    assert report.in_low == report.checked
    assert report.violations == 0
    one = largest_element_check(ring5, [xs], xs, low_rtol=1e-12)
    assert one.in_low == 1 and one.violations == 0


def test_largest_element_on_random_low_states(twelve_port):
    _, xs = oracle_state(twelve_port)
    rng = np.random.default_rng(11)
    samples = []
    for _ in range(200):
        lam = rng.uniform(0, 1)
        jitter = rng.uniform(0.9, 1.0, xs.vector().size)
        v = lam * xs.vector() * jitter
        n = len(twelve_port.node_ids)
        samples.append(State(twelve_port.pairs, twelve_port.node_ids, v[n:], v[:n]))
    report = largest_element_check(twelve_port, samples, xs)
    assert report.checked == 200 and report.in_low > 0 and report.violations == 0


def test_policy_fixpoint_matches_affine_oracle(twelve_port):
    a = exact_fixpoint(linearize(twelve_port))
    b = policy_fixpoint(twelve_port)
    np.testing.assert_allclose(a.x, b.x, rtol=1e-12)


def test_policy_fixpoint_on_shaped_ring():
    net = with_line_shaping(generators.ring(8), 1e7, 1000.0)
    fp = policy_fixpoint(net)
    assert fp.unique and fp.rho < 1 and fp.residual <= 1e-9
    out = run_sync(net, SolveOptions(eps_rel=1e-13))
    assert out.converged
    np.testing.assert_allclose(out.state.vector(), fp.x, rtol=1e-9)


def test_feedforward_fixpoint_by_substitution():
    net = generators.random_network(21, acyclic=True)
    fp, xs = oracle_state(net)
    assert fp.rho == 0.0
    # forward substitution along a topological order agrees with the linear solve
    d = {}
    z = {}
    for node in topological_order(net.node_ids, net.edges):
        fresh = sum(net.flows[f].burst for f in net.fresh_flows(node))
        R = net.nodes[node].rate
        d[node] = net.nodes[node].latency + (fresh + sum(z[p] for p in net.inc_pairs(node))) / R
        for p in net.out_pairs(node):
            f = net.flows[p[1]]
            z[p] = f.burst + f.rate * sum(d[u] for u in net.pred_f(*p))
    for node in net.node_ids:
        assert xs.d_of(node) == pytest.approx(d[node], rel=1e-12)
