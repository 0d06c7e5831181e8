"""Shared builders for randomized tests.

Everything takes an explicit ``numpy.random.Generator`` so each test
controls its own seed; nothing here touches global RNG state.
"""

import numpy as np

from consensuslab.graphs import Graph, custom_graph, erdos_renyi_graph
from consensuslab.markov import StochasticMatrix


def random_connected_graph(rng: np.random.Generator, n: int) -> Graph:
    """A connected Erdos-Renyi draw with p comfortably above the threshold."""
    if n == 1:
        return custom_graph(1, [])
    if n == 2:
        return custom_graph(2, [(0, 1)])
    p = min(1.0, 2.5 * np.log(n) / n + 0.2)
    return erdos_renyi_graph(n, p, seed=int(rng.integers(2**31)))


def random_reversible_chain(rng: np.random.Generator, n: int) -> StochasticMatrix:
    """Random-conductance lazy walk: reversible, aperiodic, irreducible.

    Positive symmetric weights w_ij on the edges of a random connected
    graph; P_ij = w_ij / (2 W_i) off-diagonal with 1/2 staying put, which
    is reversible for pi_i = W_i / sum(W).
    """
    g = random_connected_graph(rng, n)
    W = np.zeros((n, n))
    for i, j in g.edges:
        w = rng.uniform(0.2, 2.0)
        W[i, j] = W[j, i] = w
    if n == 1:
        return StochasticMatrix(np.array([[1.0]]))
    row = W.sum(axis=1)
    P = W / (2.0 * row[:, None])
    P[np.diag_indices(n)] += 0.5
    return StochasticMatrix(P)


def reversible_pi(P: StochasticMatrix) -> np.ndarray:
    return P.stationary()


def random_psd_covariance(rng: np.random.Generator, n: int) -> np.ndarray:
    """A generic strictly positive-definite covariance with O(1) entries."""
    A = rng.normal(size=(n, n))
    S = A @ A.T / n
    S += 0.05 * np.eye(n)
    return 0.5 * (S + S.T)


def mc_first_passage(
    P: StochasticMatrix,
    start: int,
    target: int,
    rng: np.random.Generator,
    trials: int = 4000,
    cap: int = 100000,
) -> float:
    """Monte Carlo mean first-passage time, a from-scratch hitting oracle.

    Samples full trajectories with searchsorted on the cumulative rows, so
    it shares no code path with the linear-algebra hitting solvers.
    """
    cum = np.cumsum(P.entries, axis=1)
    total = 0
    for _ in range(trials):
        state = start
        steps = 0
        while state != target:
            state = int(np.searchsorted(cum[state], rng.random(), side="right"))
            steps += 1
            if steps >= cap:
                raise RuntimeError("first-passage sample exceeded the step cap")
        total += steps
    return total / trials
