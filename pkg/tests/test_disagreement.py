import numpy as np
import pytest
from conftest import random_psd_covariance, random_reversible_chain

from consensuslab.disagreement import (
    NoiseCovariance,
    check_j_properties,
    delta_oracle,
    delta_ss_bounds,
    delta_ss_diag,
    delta_ss_kemeny,
    delta_ss_resistance,
    delta_ss_spectral,
    delta_ss_theorem,
    delta_uni_bounds,
    j_matrix,
    sigma_hat,
)
from consensuslab.errors import (
    InvalidParam,
    NoConvergence,
    NotIrreducible,
    NotReversible,
    NotSymmetric,
)
from consensuslab.graphs import ring_graph, star_graph
from consensuslab.markov import (
    StochasticMatrix,
    hitting_times,
    lazy_walk_matrix,
    simple_walk_matrix,
    square_chain,
)


def two_node():
    return StochasticMatrix(np.array([[0.5, 0.5], [0.5, 0.5]]))


# ---------------------------------------------------------------- noise


def test_noise_covariance_kinds():
    s = NoiseCovariance.scalar(3, 2.0)
    assert s.is_diagonal and s.equal_variance() == 2.0
    np.testing.assert_array_equal(s.matrix(), 2.0 * np.eye(3))

    d = NoiseCovariance.diagonal([1.0, 2.0, 3.0])
    assert d.is_diagonal and d.equal_variance() is None
    assert d.trace() == 6.0

    d_eq = NoiseCovariance.diagonal([2.0, 2.0])
    assert d_eq.equal_variance() == 2.0

    M = np.array([[2.0, 1.0], [1.0, 2.0]])
    f = NoiseCovariance.full(M)
    assert not f.is_diagonal
    np.testing.assert_array_equal(f.variances(), [2.0, 2.0])


def test_noise_covariance_rejects_bad_input():
    with pytest.raises(InvalidParam):
        NoiseCovariance.scalar(3, -1.0)
    with pytest.raises(InvalidParam):
        NoiseCovariance.diagonal([1.0, -0.5])
    with pytest.raises(InvalidParam):
        NoiseCovariance.full(np.array([[1.0, 2.0], [0.0, 1.0]]))  # asymmetric
    with pytest.raises(InvalidParam):
        NoiseCovariance.full(np.array([[1.0, 2.0], [2.0, 1.0]]))  # indefinite
    # zero covariance is legal (noiseless runs)
    z = NoiseCovariance.full(np.zeros((2, 2)))
    assert z.trace() == 0.0


def test_sampling_factor_reproduces_covariance():
    rng = np.random.default_rng(1)
    S = random_psd_covariance(rng, 5)
    f = NoiseCovariance.full(S)
    L = f.sampling_factor()
    np.testing.assert_allclose(L @ L.T, S, atol=1e-12)


# ------------------------------------------------------- closed forms


def test_two_node_disagreement_is_half_sigma2():
    rep = delta_ss_theorem(two_node(), NoiseCovariance.scalar(2, 1.0))
    assert rep.delta_ss == pytest.approx(0.5, abs=1e-14)
    assert rep.method == "theorem1"
    # all four routes on this symmetric chain
    assert delta_ss_kemeny(two_node(), 1.0) == pytest.approx(0.5, abs=1e-14)
    assert delta_ss_spectral(two_node(), 1.0) == pytest.approx(0.5, abs=1e-14)
    assert delta_ss_resistance(two_node(), 1.0) == pytest.approx(0.5, abs=1e-14)


def test_star_center_only_noise_hand_value():
    # lazy star n=4: pi = (1/2, 1/6, 1/6, 1/6); only the hub is noisy.
    # delta = sigma0^2 pi0^2 sum_j pi_j H2(j -> 0)
    g = star_graph(4)
    P = lazy_walk_matrix(g)
    pi = P.stationary()
    np.testing.assert_allclose(pi, [0.5, 1 / 6, 1 / 6, 1 / 6], atol=1e-12)
    H2 = hitting_times(square_chain(P))
    expected = 0.25 * float(pi @ H2[:, 0])
    got = delta_ss_diag(P, [1.0, 0.0, 0.0, 0.0])
    assert got == pytest.approx(expected, rel=1e-12)


def test_diagonal_route_matches_general_theorem():
    rng = np.random.default_rng(7)
    for _ in range(10):
        n = int(rng.integers(2, 20))
        P = random_reversible_chain(rng, n)
        v = rng.uniform(0.0, 3.0, n)
        a = delta_ss_diag(P, v)
        b = delta_ss_theorem(P, NoiseCovariance.diagonal(v)).delta_ss
        assert abs(a - b) < 1e-12 * (1 + abs(a))


def test_common_noise_produces_no_disagreement():
    # w(t) = same scalar on every node: the error dynamics never see it
    rng = np.random.default_rng(2)
    for n in (2, 5, 9):
        P = random_reversible_chain(rng, n)
        common = NoiseCovariance.full(np.ones((n, n)))
        rep = delta_ss_theorem(P, common)
        assert abs(rep.delta_ss) < 1e-12
        _, orep = delta_oracle(P, common)
        assert abs(orep.delta_ss) < 1e-12


def test_closed_form_requires_reversibility_and_aperiodicity():
    nonrev = StochasticMatrix(np.array([
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
    ]))
    with pytest.raises(NotReversible):
        delta_ss_theorem(nonrev, NoiseCovariance.scalar(3, 1.0))
    periodic = simple_walk_matrix(ring_graph(8))
    with pytest.raises(NotIrreducible):
        delta_ss_theorem(periodic, NoiseCovariance.scalar(8, 1.0))
    # sigma^2 K/n formula additionally needs symmetry
    lazy_star = lazy_walk_matrix(star_graph(5))
    with pytest.raises(NotSymmetric):
        delta_ss_kemeny(lazy_star, 1.0)


# ------------------------------------------------------------- oracle


def test_oracle_matches_theorem_on_random_instances():
    rng = np.random.default_rng(123)
    for _ in range(25):
        n = int(rng.integers(2, 12))
        P = random_reversible_chain(rng, n)
        noise = NoiseCovariance.full(random_psd_covariance(rng, n))
        rep = delta_ss_theorem(P, noise)
        _, orep = delta_oracle(P, noise)
        assert abs(rep.delta_ss - orep.delta_ss) <= 1e-8 * (1 + orep.delta_ss)
        assert orep.method == "oracle"
        assert orep.delta_uni_exact is not None


def test_oracle_is_insensitive_to_the_starting_covariance():
    rng = np.random.default_rng(8)
    P = random_reversible_chain(rng, 6)
    noise = NoiseCovariance.diagonal(rng.uniform(0.1, 2.0, 6))
    _, a = delta_oracle(P, noise)
    S0 = random_psd_covariance(rng, 6)
    _, b = delta_oracle(P, noise, sigma0=S0)
    assert abs(a.delta_ss - b.delta_ss) < 1e-8 * (1 + a.delta_ss)


def test_oracle_diagnoses_no_convergence_on_periodic_chain():
    P = simple_walk_matrix(ring_graph(6))
    with pytest.raises(NoConvergence) as ei:
        delta_oracle(P, NoiseCovariance.scalar(6, 1.0), max_iters=400)
    # diagnostics carry the non-settling trace
    assert ei.value.trace_history is not None
    assert len(ei.value.trace_history) > 2


def test_oracle_reports_iterations_and_residual():
    P = lazy_walk_matrix(ring_graph(6))
    cov, rep = delta_oracle(P, NoiseCovariance.scalar(6, 1.0))
    assert cov.iterations > 0
    assert cov.residual <= 1e-12 * (1 + np.abs(cov.matrix).max())
    assert rep.diagnostics["iterations"] == cov.iterations


# ------------------------------------------------------------- bounds


def test_delta_uni_sandwich_on_random_chains():
    rng = np.random.default_rng(77)
    for _ in range(20):
        n = int(rng.integers(2, 15))
        P = random_reversible_chain(rng, n)
        noise = NoiseCovariance.diagonal(rng.uniform(0.1, 2.0, n))
        lo, hi = delta_uni_bounds(P, noise)
        _, orep = delta_oracle(P, noise)
        uni = orep.delta_uni_exact
        slack = 1e-9 * (1 + abs(uni))
        assert lo - slack <= uni <= hi + slack
        pi = P.stationary()
        rep = delta_ss_theorem(P, noise)
        assert hi / max(lo, 1e-300) == pytest.approx(pi.max() / pi.min(), rel=1e-10)
        assert lo == pytest.approx(rep.delta_ss / (n * pi.max()), rel=1e-12)


def test_kemeny_resistance_bounds_bracket_delta():
    rng = np.random.default_rng(31)
    for _ in range(10):
        n = int(rng.integers(3, 15))
        P = random_reversible_chain(rng, n)
        v = rng.uniform(0.5, 1.5, n)
        lo, hi = delta_ss_bounds(P, v)
        d = delta_ss_diag(P, v)
        assert lo <= d * (1 + 1e-12) and d <= hi * (1 + 1e-12)


# ------------------------------------------- projection and Sigma-hat


def test_j_matrix_properties_hold_on_random_chains():
    rng = np.random.default_rng(4)
    for _ in range(10):
        n = int(rng.integers(2, 15))
        P = random_reversible_chain(rng, n)
        rep = check_j_properties(P)
        assert rep.ok(1e-12), rep.violations
        assert rep.rho < 1.0
        J = j_matrix(P)
        np.testing.assert_allclose(J @ J, J, atol=1e-12)


def test_sigma_hat_identities():
    rng = np.random.default_rng(14)
    for _ in range(10):
        n = int(rng.integers(2, 12))
        P = random_reversible_chain(rng, n)
        noise = NoiseCovariance.full(random_psd_covariance(rng, n))
        S = sigma_hat(P, noise)
        rep = delta_ss_theorem(P, noise)
        scale = 1 + np.abs(S).max()
        # trace equals the disagreement
        assert abs(np.trace(S) - rep.delta_ss) < 1e-10 * scale
        # J annihilates it
        J = j_matrix(P)
        assert np.abs(J @ S).max() < 1e-10 * scale
        # and it solves the stationarity equation
        E2 = np.linalg.matrix_power(P.entries, 2)
        pi = P.stationary()
        rhs = (np.eye(n) - J) @ noise.matrix() @ np.diag(pi)
        assert np.abs(S - (E2 @ S + rhs)).max() < 1e-10 * scale


def test_report_json_shape():
    rep = delta_ss_theorem(two_node(), NoiseCovariance.scalar(2, 1.0))
    doc = rep.to_json_dict()
    assert set(doc) >= {"delta_ss", "delta_uni_lower", "delta_uni_upper", "method", "n"}
    assert doc["method"] == "theorem1"
    assert doc["n"] == 2
