"""Finite Markov-chain analytics: stationary laws, hitting times, Kemeny
constants, and effective resistances.

The central object is :class:`StochasticMatrix`, a validated row-stochastic
matrix with lazily computed structural flags (irreducible, aperiodic,
symmetric, reversible).  Chains built from graphs come in three flavors:

* ``simple_walk_matrix``: P[i,j] = 1/d(i) on edges.  On a bipartite graph
  this walk is periodic, so quantities that need aperiodicity will refuse it.
* ``lazy_walk_matrix``: (1/2) I + (1/2) simple walk.  Its stationary law has
  the closed form pi_i = d(i) / (2m).
* ``uniform_edge_matrix``: weight eps on every edge (default 1/(2 max
  degree)) and 1 - eps*d(i) on the diagonal.  Symmetric for every graph, and
  identical to the lazy walk on regular graphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from . import tolerances as tol
from .errors import (
    DisconnectedGraph,
    EigSolverFailure,
    InvalidParam,
    NotIrreducible,
    NotReversible,
    RandomTargetViolation,
    SingularSystem,
)
from .graphs import Graph, is_connected

__all__ = [
    "StochasticMatrix",
    "ChainAnalysis",
    "simple_walk_matrix",
    "lazy_walk_matrix",
    "uniform_edge_matrix",
    "degree_stationary",
    "stationary_distribution",
    "hitting_times",
    "square_chain",
    "kemeny_constant_combinatorial",
    "kemeny_constant_spectral",
    "effective_resistance",
    "analyze_chain",
    "write_matrix_csv",
]

# per-target LU is O(n^4) over all targets; past this size use the
# fundamental-matrix route (same residual guarantee, one factorization)
_PER_TARGET_MAX_N = 200


class StochasticMatrix:
    """A validated row-stochastic matrix with cached structural flags.

    Parameters
    ----------
    entries : array_like, shape (n, n)
        Nonnegative entries with each row summing to 1 within
        ``row_sum_tol``.  The array is copied and frozen.
    """

    def __init__(self, entries, *, row_sum_tol: float = tol.ROW_SUM_TOL):
        arr = np.array(entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InvalidParam(f"transition matrix must be square, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise InvalidParam("transition matrix must be at least 1x1")
        if np.any(arr < 0):
            raise InvalidParam("transition matrix has negative entries")
        rs = arr.sum(axis=1)
        worst = np.abs(rs - 1.0).max()
        if worst > row_sum_tol:
            raise InvalidParam(
                f"rows must sum to 1 within {row_sum_tol:g} (worst deviation {worst:.3e})"
            )
        arr.setflags(write=False)
        self._entries = arr

    # -- basic access -------------------------------------------------

    @property
    def entries(self) -> np.ndarray:
        """Read-only view of the underlying array."""
        return self._entries

    @property
    def n(self) -> int:
        return self._entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is not None:
            return self._entries.astype(dtype)
        return self._entries

    def __repr__(self) -> str:
        return f"StochasticMatrix(n={self.n})"

    # -- structural flags (lazy, cached) ------------------------------

    @cached_property
    def irreducible(self) -> bool:
        a = self._entries
        if np.all(a > 0):
            return True
        from scipy.sparse import csr_matrix
        from scipy.sparse.csgraph import connected_components
        ncomp, _ = connected_components(
            csr_matrix(a > 0), directed=True, connection="strong"
        )
        return ncomp == 1

    @cached_property
    def aperiodic(self) -> bool:
        """True iff irreducible with period 1 (single-state chains count)."""
        if not self.irreducible:
            return False
        if np.any(np.diag(self._entries) > 0):
            return True
        return self._period() == 1

    def _period(self) -> int:
        # gcd of (level[u] + 1 - level[v]) over directed edges, with levels
        # from a BFS; equals the period for an irreducible chain
        a = self._entries > 0
        n = self.n
        nbrs = [np.nonzero(a[u])[0] for u in range(n)]
        level = np.full(n, -1, dtype=np.int64)
        level[0] = 0
        queue = [0]
        g = 0
        head = 0
        while head < len(queue):
            u = queue[head]
            head += 1
            for v in nbrs[u]:
                if level[v] < 0:
                    level[v] = level[u] + 1
                    queue.append(v)
                else:
                    g = math.gcd(g, int(level[u] + 1 - level[v]))
        return g if g > 0 else 1

    @cached_property
    def symmetric(self) -> bool:
        a = self._entries
        scale = max(1.0, float(np.abs(a).max()))
        return float(np.abs(a - a.T).max()) <= tol.SYMMETRY_RTOL * scale

    @cached_property
    def reversible(self) -> bool:
        """Detailed balance pi_i P_ij = pi_j P_ji within tolerance."""
        if not self.irreducible:
            return False
        pi = self.stationary()
        flux = pi[:, None] * self._entries
        scale = float(flux.max())
        return float(np.abs(flux - flux.T).max()) <= tol.REVERSIBILITY_RTOL * scale

    # -- stationary law ------------------------------------------------

    def stationary(self, *, residual_tol: float = tol.STATIONARY_RESIDUAL_TOL) -> np.ndarray:
        if self._pi_cache is None:
            self._pi_cache = _solve_stationary(self, residual_tol)
        return self._pi_cache

    _pi_cache: np.ndarray | None = None


def _solve_stationary(P: StochasticMatrix, residual_tol: float) -> np.ndarray:
    if not P.irreducible:
        raise NotIrreducible("stationary distribution needs an irreducible chain")
    n = P.n
    if n == 1:
        return np.ones(1)
    # (P' - I) pi = 0 with one row traded for the normalization sum(pi) = 1
    A = P.entries.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = scipy.linalg.solve(A, b)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystem(f"stationary solve failed: {exc}") from exc
    resid = float(np.abs(pi @ P.entries - pi).max())
    if resid > residual_tol:
        raise SingularSystem(
            f"stationary residual {resid:.3e} exceeds {residual_tol:g}"
        )
    if pi.min() <= 0:
        raise SingularSystem("stationary solve produced non-positive mass")
    pi /= pi.sum()
    pi.setflags(write=False)
    return pi


def stationary_distribution(
    P: StochasticMatrix, *, residual_tol: float = tol.STATIONARY_RESIDUAL_TOL
) -> np.ndarray:
    """Stationary distribution of an irreducible chain.

    Solved as the linear system (P' - I) pi = 0 with one equation replaced
    by the normalization; the result is checked against
    ``||pi' P - pi'||_inf <= residual_tol`` and positivity.
    """
    return P.stationary(residual_tol=residual_tol)


# =====================================================================
# chains from graphs
# =====================================================================

def _require_connected(g: Graph) -> None:
    if not is_connected(g):
        raise DisconnectedGraph(f"graph {g.family} is not connected")


def simple_walk_matrix(g: Graph) -> StochasticMatrix:
    """P[i,j] = 1/d(i) on edges of a connected graph with n >= 2.

    Periodic (hence unusable for steady-state formulas) exactly when the
    graph is bipartite.
    """
    if g.n < 2:
        raise InvalidParam("simple random walk needs n >= 2")
    _require_connected(g)
    a = g.adjacency()
    return StochasticMatrix(a / a.sum(axis=1, keepdims=True))


def lazy_walk_matrix(g: Graph) -> StochasticMatrix:
    """(1/2) I + (1/2) simple walk; stationary law d(i)/(2m).

    The single-node graph gets the trivial chain [[1]].
    """
    if g.n == 1:
        return StochasticMatrix([[1.0]])
    _require_connected(g)
    a = g.adjacency()
    p = 0.5 * a / a.sum(axis=1, keepdims=True)
    p[np.diag_indices(g.n)] += 0.5
    return StochasticMatrix(p)

def uniform_edge_matrix(g: Graph, eps: float | None = None) -> StochasticMatrix:
    """Symmetric walk: weight eps on every edge, 1 - eps*d(i) on the diagonal.

    Defaults to eps = 1/(2 * max degree), which keeps every diagonal entry
    >= 1/2; any eps < 1/max_degree is accepted.  Coincides with the lazy
    walk when the graph is regular.
    """
    if g.n == 1:
        return StochasticMatrix([[1.0]])
    _require_connected(g)
    d = g.degrees()
    dmax = int(d.max())
    if eps is None:
        eps = 1.0 / (2.0 * dmax)
    if not (0.0 < eps < 1.0 / dmax):
        raise InvalidParam(
            f"edge weight must satisfy 0 < eps < 1/max_degree = {1.0 / dmax:g}, got {eps}"
        )
    p = eps * g.adjacency()
    p[np.diag_indices(g.n)] = 1.0 - eps * d
    return StochasticMatrix(p)


def degree_stationary(g: Graph) -> np.ndarray:
    """Closed-form stationary law d(i)/(2m) of the simple and lazy walks."""
    d = g.degrees().astype(float)
    if g.m == 0:
        raise InvalidParam("degree stationary law needs at least one edge")
    return d / (2.0 * g.m)


# =====================================================================
# hitting times
# =====================================================================

def hitting_times(
    P: StochasticMatrix,
    *,
    method: str = "auto",
    residual_tol: float = tol.HITTING_RESIDUAL_TOL,
) -> np.ndarray:
    """Matrix of expected hitting times H[i, j] = E_i[time to reach j].

    Two routes, both verified against the defining equations
    ``H[i,j] = 1 + sum_k P[i,k] H[k,j]`` (i != j, H[j,j] = 0) with residual
    tolerance ``residual_tol * n``:

    * ``per-target``: for each target j solve (I - P) h = 1 with row j
      replaced by h_j = 0.  One LU per target; the default for n <= 200.
    * ``fundamental``: invert I - P + 1 pi' once and read off
      H[i,j] = (Z[j,j] - Z[i,j]) / pi[j].  Used above that size, where
      per-target is O(n^4).

    Parameters
    ----------
    P : StochasticMatrix
        Must be irreducible.
    method : {"auto", "per-target", "fundamental"}
    """
    if not P.irreducible:
        raise NotIrreducible("hitting times need an irreducible chain")
    n = P.n
    if n == 1:
        return np.zeros((1, 1))
    if method == "auto":
        method = "per-target" if n <= _PER_TARGET_MAX_N else "fundamental"
    if method == "per-target":
        H = _hitting_per_target(P.entries)
    elif method == "fundamental":
        H = _hitting_fundamental(P)
    else:
        raise InvalidParam(f"unknown hitting-time method {method!r}")
    resid = H - P.entries @ H - 1.0
    np.fill_diagonal(resid, 0.0)
    worst = float(np.abs(resid).max())
    if worst > residual_tol * n:
        raise SingularSystem(
            f"hitting-time residual {worst:.3e} exceeds {residual_tol * n:.3e}"
        )
    return H


def _hitting_per_target(E: np.ndarray) -> np.ndarray:
    n = E.shape[0]
    H = np.zeros((n, n))
    eye = np.eye(n)
    ones = np.ones(n)
    for j in range(n):
        A = eye - E
        A[j, :] = 0.0
        A[j, j] = 1.0
        b = ones.copy()
        b[j] = 0.0
        try:
            H[:, j] = scipy.linalg.solve(A, b)
        except scipy.linalg.LinAlgError as exc:
            raise SingularSystem(f"hitting-time solve failed for target {j}: {exc}") from exc
    return H


def _hitting_fundamental(P: StochasticMatrix) -> np.ndarray:
    pi = P.stationary()
    n = P.n
    B = np.eye(n) - P.entries + np.outer(np.ones(n), pi)
    try:
        Z = scipy.linalg.solve(B, np.eye(n))
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystem(f"fundamental-matrix solve failed: {exc}") from exc
    H = (np.diag(Z)[None, :] - Z) / pi[None, :]
    np.fill_diagonal(H, 0.0)
    return H


def square_chain(P: StochasticMatrix) -> StochasticMatrix:
    """The two-step chain P @ P."""
    return StochasticMatrix(P.entries @ P.entries)


# =====================================================================
# Kemeny constant and resistance
# =====================================================================

def kemeny_constant_combinatorial(
    P: StochasticMatrix,
    *,
    hitting: np.ndarray | None = None,
    start_tol: float = tol.RANDOM_TARGET_TOL,
) -> float:
    """K = sum_j pi_j H(i -> j), verified to be the same from every start i.

    The start-independence check (max deviation <= start_tol * (1 + K))
    doubles as a health check on the hitting-time solves; a violation
    raises RandomTargetViolation.

    Pass ``hitting`` to reuse a precomputed hitting-time matrix.
    """
    pi = P.stationary()
    H = hitting_times(P) if hitting is None else hitting
    sums = H @ pi
    K = float(sums[0])
    dev = float(np.abs(sums - K).max())
    if dev > start_tol * (1.0 + abs(K)):
        raise RandomTargetViolation(
            f"Kemeny sum varies with the start state by {dev:.3e} "
            f"(allowed {start_tol * (1.0 + abs(K)):.3e})"
        )
    return K


def kemeny_constant_spectral(P: StochasticMatrix) -> float:
    """K = sum over non-unit eigenvalues of 1/(1 - lambda).

    Reversible chains are symmetrized as D^{1/2} P D^{-1/2} and handed to a
    symmetric eigensolver (real spectrum, stable); everything else goes to
    the general solver, and the imaginary residue of the sum must vanish
    within tolerance.
    """
    if not P.irreducible:
        raise NotIrreducible("Kemeny constant needs an irreducible chain")
    if P.n == 1:
        return 0.0
    try:
        if P.reversible:
            s = np.sqrt(P.stationary())
            S = (s[:, None] * P.entries) / s[None, :]
            S = 0.5 * (S + S.T)
            lam = np.linalg.eigvalsh(S)
        else:
            lam = np.linalg.eigvals(P.entries)
    except np.linalg.LinAlgError as exc:
        raise EigSolverFailure(f"eigenvalue solve failed: {exc}") from exc
    # exactly one unit eigenvalue for an irreducible chain; drop it
    drop = int(np.argmin(np.abs(lam - 1.0)))
    if abs(lam[drop] - 1.0) > 1e-8:
        raise EigSolverFailure(
            f"no eigenvalue close to 1 (nearest {lam[drop]!r}); spectrum unusable"
        )
    rest = np.delete(lam, drop)
    K = np.sum(1.0 / (1.0 - rest))
    if np.iscomplexobj(K):
        if abs(K.imag) > tol.SPECTRAL_IMAG_TOL * (1.0 + abs(K.real)):
            raise EigSolverFailure(
                f"Kemeny spectral sum has imaginary residue {K.imag:.3e}"
            )
        K = K.real
    return float(K)


def effective_resistance(
    P: StochasticMatrix, *, hitting: np.ndarray | None = None
) -> np.ndarray:
    """Pairwise effective resistances via the commute-time identity.

    For a reversible chain with conductances c(x,y) = pi_x P[x,y],
    R(i <-> j) = H(i -> j) + H(j -> i); that identity is taken as the
    definition here.  Requires reversibility.
    """
    if not P.reversible:
        raise NotReversible("effective resistance needs a reversible chain")
    H = hitting_times(P) if hitting is None else hitting
    return H + H.T


@dataclass(frozen=True)
class ChainAnalysis:
    """Bundle of the standard chain quantities (resistance optional)."""

    matrix: StochasticMatrix
    pi: np.ndarray
    hitting: np.ndarray
    kemeny: float
    resistance: np.ndarray | None = None


def analyze_chain(P: StochasticMatrix, *, with_resistance: bool = True) -> ChainAnalysis:
    pi = P.stationary()
    H = hitting_times(P)
    K = kemeny_constant_combinatorial(P, hitting=H)
    R = None
    if with_resistance and P.reversible:
        R = effective_resistance(P, hitting=H)
    return ChainAnalysis(matrix=P, pi=pi, hitting=H, kemeny=K, resistance=R)


def write_matrix_csv(path, M) -> None:
    """Row-major CSV dump with 17 significant digits."""
    np.savetxt(path, np.asarray(M, dtype=float), fmt="%.16e", delimiter=",")
