"""Steady-state disagreement of noisy linear consensus.

The recursion x(t+1) = P x(t) + w(t), with P row-stochastic and w zero-mean
noise of covariance Sigma_w, never agrees: the error around the conserved
weighted average keeps a steady-state spread.  The weighted disagreement

    delta_ss = limsup_t  sum_i pi_i E[(x_i(t) - pi' x(t))^2]

has a closed form for reversible chains in terms of hitting times of the
*squared* chain:

    delta_ss = pi' H D Sigma_w D 1  -  Tr(H D Sigma_w D),
    H = hitting_times(P^2),  D = diag(pi).

This module implements that closed form, its specializations (diagonal
noise, equal-variance noise on symmetric chains via the Kemeny constant /
spectrum / effective resistances), two-sided bounds, and an independent
oracle that iterates the error-covariance fixed point directly.  The
uniform disagreement delta_uni (plain average instead of pi-weighted) is
bracketed by the sandwich delta_ss/(n pi_max) <= delta_uni <=
delta_ss/(n pi_min).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tolerances
from .errors import (
    DimensionMismatch,
    InvalidParam,
    NoConvergence,
    NotIrreducible,
    NotReversible,
    NotSymmetric,
)
from .markov import (
    StochasticMatrix,
    effective_resistance,
    hitting_times,
    kemeny_constant_combinatorial,
    square_chain,
)

__all__ = [
    "NoiseCovariance",
    "DisagreementReport",
    "SteadyStateCovariance",
    "JPropertyReport",
    "delta_ss_theorem",
    "delta_ss_diag",
    "delta_ss_kemeny",
    "delta_ss_spectral",
    "delta_ss_resistance",
    "delta_ss_bounds",
    "delta_uni_bounds",
    "delta_oracle",
    "sigma_hat",
    "j_matrix",
    "check_j_properties",
]


# =====================================================================
# noise covariance
# =====================================================================

class NoiseCovariance:
    """Per-step noise covariance, kind-tagged: scalar, diagonal, or full.

    Construct through the factories :meth:`scalar`, :meth:`diagonal`,
    :meth:`full`.  Full matrices must be symmetric and positive
    semidefinite; PSD is checked by a Cholesky of Sigma + eps*I with
    eps = PSD_SHIFT_SCALE * trace / n.
    """

    def __init__(self, kind: str, n: int, data: np.ndarray):
        self._kind = kind
        self._n = n
        self._data = data
        self._factor: np.ndarray | None = None

    @classmethod
    def scalar(cls, n: int, sigma2: float) -> "NoiseCovariance":
        if n < 1:
            raise InvalidParam(f"need n >= 1, got {n}")
        if sigma2 < 0:
            raise InvalidParam(f"variance must be >= 0, got {sigma2}")
        return cls("scalar", n, np.float64(sigma2))

    @classmethod
    def diagonal(cls, variances) -> "NoiseCovariance":
        v = np.array(variances, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise InvalidParam("diagonal noise needs a 1-d variance vector")
        if np.any(v < 0):
            raise InvalidParam("variances must be >= 0")
        v.setflags(write=False)
        return cls("diagonal", v.size, v)

    @classmethod
    def full(cls, matrix) -> "NoiseCovariance":
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidParam(f"full covariance must be square, got shape {m.shape}")
        n = m.shape[0]
        scale = max(1.0, float(np.abs(m).max()))
        if float(np.abs(m - m.T).max()) > 1e-12 * scale:
            raise InvalidParam("covariance must be symmetric")
        m = 0.5 * (m + m.T)
        tr = float(np.trace(m))
        if tr < 0:
            raise InvalidParam("covariance has negative trace")
        if tr == 0.0:
            if np.abs(m).max() > 0.0:
                raise InvalidParam("zero-trace covariance must be the zero matrix")
        else:
            shift = tolerances.PSD_SHIFT_SCALE * tr / n
            try:
                np.linalg.cholesky(m + shift * np.eye(n))
            except np.linalg.LinAlgError:
                raise InvalidParam(
                    "covariance is not positive semidefinite (shifted Cholesky failed)"
                ) from None
        m.setflags(write=False)
        return cls("full", n, m)

    @property
    def kind(self) -> str:
        return self._kind

    @property
    def n(self) -> int:
        return self._n

    @property
    def is_diagonal(self) -> bool:
        return self._kind != "full"

    def matrix(self) -> np.ndarray:
        """Dense (n, n) covariance."""
        if self._kind == "scalar":
            return float(self._data) * np.eye(self._n)
        if self._kind == "diagonal":
            return np.diag(self._data)
        return np.array(self._data)

    def variances(self) -> np.ndarray:
        """Diagonal of the covariance."""
        if self._kind == "scalar":
            return np.full(self._n, float(self._data))
        if self._kind == "diagonal":
            return np.array(self._data)
        return np.diag(self._data).copy()

    def equal_variance(self) -> float | None:
        """sigma^2 if the covariance is exactly sigma^2 * I, else None."""
        if self._kind == "scalar":
            return float(self._data)
        if self._kind == "diagonal":
            v = self._data
            if np.all(v == v[0]):
                return float(v[0])
        return None

    def trace(self) -> float:
        return float(self.variances().sum())

    def sampling_factor(self) -> np.ndarray:
        """A factor L with L L' = Sigma, for drawing correlated noise.

        Built from the symmetric eigendecomposition so that PSD-singular
        covariances (rank deficient) work too.  Only meaningful for the
        ``full`` kind; diagonal kinds use sqrt(variances) directly.
        """
        if self._kind != "full":
            raise InvalidParam("sampling_factor is for full covariances")
        if self._factor is None:
            w, v = np.linalg.eigh(self._data)
            w = np.clip(w, 0.0, None)
            self._factor = v * np.sqrt(w)[None, :]
        return self._factor

    def __repr__(self) -> str:
        return f"NoiseCovariance(kind={self._kind!r}, n={self._n})"


def _check_noise(P: StochasticMatrix, noise: NoiseCovariance) -> None:
    if noise.n != P.n:
        raise DimensionMismatch(
            f"noise covariance is {noise.n}-dimensional but the chain has {P.n} states"
        )


# =====================================================================
# reports
# =====================================================================

@dataclass
class DisagreementReport:
    """Weighted disagreement plus the sandwich on its uniform counterpart."""

    delta_ss: float
    delta_uni_lower: float
    delta_uni_upper: float
    method: str
    delta_uni_exact: float | None = None
    n: int | None = None
    graph_family: str | None = None
    seed: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out: dict = {
            "delta_ss": self.delta_ss,
            "delta_uni_lower": self.delta_uni_lower,
            "delta_uni_upper": self.delta_uni_upper,
        }
        if self.delta_uni_exact is not None:
            out["delta_uni_exact"] = self.delta_uni_exact
        out["method"] = self.method
        out["n"] = self.n
        out["graph_family"] = self.graph_family
        out["seed"] = self.seed
        return out


@dataclass(frozen=True)
class SteadyStateCovariance:
    """Converged error covariance with iteration diagnostics."""

    matrix: np.ndarray
    iterations: int
    residual: float


@dataclass(frozen=True)
class JPropertyReport:
    """Violations of the projector identities around J = 1 pi'."""

    violations: dict
    rho: float

    def max_violation(self) -> float:
        return max(self.violations.values())

    def ok(self, identity_tol: float = 1e-12) -> bool:
        return self.max_violation() <= identity_tol and self.rho < 1.0


def _sandwich(delta: float, pi: np.ndarray) -> tuple[float, float]:
    n = pi.size
    return delta / (n * float(pi.max())), delta / (n * float(pi.min()))


def _require_closed_form(P: StochasticMatrix) -> None:
    if not P.irreducible:
        raise NotIrreducible("closed form needs an irreducible chain")
    if not P.aperiodic:
        raise NotIrreducible(
            "chain is periodic, so the squared chain is reducible; "
            "use a lazy walk or the simulator"
        )
    if not P.reversible:
        raise NotReversible("closed form holds for reversible chains only")


def _hitting_sq(P: StochasticMatrix, hitting_sq: np.ndarray | None) -> np.ndarray:
    if hitting_sq is not None:
        return hitting_sq
    return hitting_times(square_chain(P))


# =====================================================================
# closed forms
# =====================================================================

def delta_ss_theorem(
    P: StochasticMatrix,
    noise: NoiseCovariance,
    *,
    hitting_sq: np.ndarray | None = None,
) -> DisagreementReport:
    """Exact weighted steady-state disagreement of a reversible chain.

    delta_ss = pi' H D Sigma D 1 - Tr(H D Sigma D) with H the hitting
    times of P^2 and D = diag(pi).  Pass ``hitting_sq`` to reuse a
    precomputed H.  The report's uniform-disagreement fields hold the
    sandwich bounds delta_ss/(n pi_max) and delta_ss/(n pi_min).
    """
    _check_noise(P, noise)
    _require_closed_form(P)
    pi = P.stationary()
    H = _hitting_sq(P, hitting_sq)
    A = (pi[:, None] * noise.matrix()) * pi[None, :]
    term1 = float(pi @ (H @ A.sum(axis=1)))
    term2 = float(np.sum(H * A.T))
    delta = term1 - term2
    lo, hi = _sandwich(delta, pi)
    return DisagreementReport(
        delta_ss=delta,
        delta_uni_lower=lo,
        delta_uni_upper=hi,
        method="theorem1",
        n=P.n,
    )


def delta_ss_diag(
    P: StochasticMatrix,
    variances,
    *,
    hitting_sq: np.ndarray | None = None,
) -> float:
    """Diagonal-noise specialization: sum_ij sigma_i^2 pi_i^2 pi_j H(j -> i)."""
    v = np.asarray(variances, dtype=float)
    if v.shape != (P.n,):
        raise DimensionMismatch(f"need {P.n} variances, got shape {v.shape}")
    if np.any(v < 0):
        raise InvalidParam("variances must be >= 0")
    _require_closed_form(P)
    pi = P.stationary()
    H = _hitting_sq(P, hitting_sq)
    reach = pi @ H  # reach[i] = sum_j pi_j H(j -> i)
    return float(np.sum(v * pi * pi * reach))


def _require_symmetric_aperiodic(P: StochasticMatrix) -> None:
    if not P.symmetric:
        raise NotSymmetric("this specialization needs a symmetric transition matrix")
    if not P.irreducible:
        raise NotIrreducible("need an irreducible chain")
    if not P.aperiodic:
        raise NotIrreducible("chain is periodic; no steady state exists")


def delta_ss_kemeny(P: StochasticMatrix, sigma2: float) -> float:
    """Equal-variance noise on a symmetric chain: sigma^2 K(P^2) / n."""
    if sigma2 < 0:
        raise InvalidParam("variance must be >= 0")
    _require_symmetric_aperiodic(P)
    K = kemeny_constant_combinatorial(square_chain(P))
    return sigma2 * K / P.n


def delta_ss_spectral(P: StochasticMatrix, sigma2: float) -> float:
    """Same quantity from the spectrum: (sigma^2/n) sum 1/(1 - lambda^2)."""
    if sigma2 < 0:
        raise InvalidParam("variance must be >= 0")
    _require_symmetric_aperiodic(P)
    lam = np.linalg.eigvalsh(P.entries)
    drop = int(np.argmin(np.abs(lam - 1.0)))
    rest = np.delete(lam, drop)
    return sigma2 / P.n * float(np.sum(1.0 / (1.0 - rest ** 2)))


def delta_ss_resistance(P: StochasticMatrix, sigma2: float) -> float:
    """Same quantity from resistances: (sigma^2/n) * sum_{i<j} R_{P^2}(i,j) / n^2."""
    if sigma2 < 0:
        raise InvalidParam("variance must be >= 0")
    _require_symmetric_aperiodic(P)
    R = effective_resistance(square_chain(P))
    return sigma2 / P.n * float(R.sum() / 2.0) / P.n ** 2


def delta_ss_bounds(
    P: StochasticMatrix,
    variances,
    *,
    hitting_sq: np.ndarray | None = None,
) -> tuple[float, float]:
    """Two-sided bounds for diagonal noise on a reversible chain.

    lower = (min_i sigma_i^2 pi_i) * K(P^2)
    upper = (max_i sigma_i^2 pi_i) * max_ij R_{P^2}(i, j)
    """
    v = np.asarray(variances, dtype=float)
    if v.shape != (P.n,):
        raise DimensionMismatch(f"need {P.n} variances, got shape {v.shape}")
    _require_closed_form(P)
    pi = P.stationary()
    P2 = square_chain(P)
    H = _hitting_sq(P, hitting_sq)
    K = kemeny_constant_combinatorial(P2, hitting=H)
    R = H + H.T
    lower = float((v * pi).min()) * K
    upper = float((v * pi).max()) * float(R.max())
    return lower, upper


def delta_uni_bounds(P: StochasticMatrix, noise: NoiseCovariance) -> tuple[float, float]:
    """Sandwich on the uniform disagreement, via the exact weighted value."""
    rep = delta_ss_theorem(P, noise)
    return rep.delta_uni_lower, rep.delta_uni_upper


# =====================================================================
# oracle: covariance fixed point
# =====================================================================

def delta_oracle(
    P: StochasticMatrix,
    noise: NoiseCovariance,
    *,
    tol: float = tolerances.ORACLE_TOL,
    max_iters: int | None = None,
    sigma0: np.ndarray | None = None,
) -> tuple[SteadyStateCovariance, DisagreementReport]:
    """Steady state by iterating the error-covariance recursion directly.

    S(t+1) = (P - J) S(t) (P - J)' + (I - J) Sigma_w (I - J)',  S(0) = 0,

    run until the update falls below ``tol_ * (1 + max|S|)``.  Works for any
    irreducible chain (no reversibility needed), which is what makes it an
    independent check on the closed forms.  delta_ss = Tr(S diag(pi)) and
    delta_uni = Tr(S)/n.

    The default iteration budget is ceil(200 / max(1e-6, -ln rho)) with
    rho = rho(P - J), capped at 1e6; when rho >= 1 - 1e-12 (no contraction,
    e.g. a noisy bipartite walk) a short diagnostic window runs instead and
    NoConvergence carries the growing trace history.  An explicit
    ``max_iters`` always wins.  ``sigma0`` overrides the zero start —
    the limit must not depend on it.
    """
    _check_noise(P, noise)
    if not P.irreducible:
        raise NotIrreducible("the covariance recursion needs an irreducible chain")
    n = P.n
    pi = P.stationary()
    J = np.outer(np.ones(n), pi)
    M = P.entries - J
    IJ = np.eye(n) - J
    N = IJ @ noise.matrix() @ IJ.T
    N = 0.5 * (N + N.T)

    rho = float(np.abs(np.linalg.eigvals(M)).max()) if n > 1 else 0.0
    budget = max_iters
    if budget is None:
        budget = min(int(math.ceil(200.0 / max(1e-6, -math.log(rho)))) if rho > 0 else 200,
                     1_000_000)
        if rho >= 1.0 - 1e-12:
            budget = 512  # provably no contraction; collect evidence and bail

    if sigma0 is not None:
        S = np.array(sigma0, dtype=float)
        if S.shape != (n, n):
            raise DimensionMismatch(f"sigma0 must be ({n},{n}), got {S.shape}")
    else:
        S = np.zeros((n, n))

    trace_history = []
    converged = False
    its = 0
    for its in range(1, budget + 1):
        S_next = M @ S @ M.T + N
        diff = float(np.abs(S_next - S).max())
        S = S_next
        trace_history.append(float(np.trace(S)))
        if diff <= tol * (1.0 + float(np.abs(S).max())):
            converged = True
            break
    if not converged:
        raise NoConvergence(
            f"covariance iteration did not converge in {its} steps "
            f"(rho(P-J) = {rho:.6g}); final trace {trace_history[-1]:.6g}",
            iterations=its,
            trace_history=np.asarray(trace_history),
        )

    residual = float(np.abs(M @ S @ M.T + N - S).max())
    delta = float(np.diag(S) @ pi)
    delta_uni = float(np.trace(S) / n)
    lo, hi = _sandwich(delta, pi)
    cov = SteadyStateCovariance(matrix=S, iterations=its, residual=residual)
    rep = DisagreementReport(
        delta_ss=delta,
        delta_uni_lower=lo,
        delta_uni_upper=hi,
        method="oracle",
        delta_uni_exact=delta_uni,
        n=n,
        diagnostics={"iterations": its, "residual": residual, "rho": rho},
    )
    return cov, rep


# =====================================================================
# structure checks
# =====================================================================

def j_matrix(P: StochasticMatrix) -> np.ndarray:
    """The projector J = 1 pi' onto the consensus direction."""
    return np.outer(np.ones(P.n), P.stationary())


def check_j_properties(P: StochasticMatrix, powers=(1, 2, 3)) -> JPropertyReport:
    """Measure the projector identities instead of assuming them.

    Checks J1 = 1, JP = PJ = J, J^2 = J, (I-J)^2 = I-J, the power identity
    (P^l - J)^k = P^(lk) - J over the sampled exponents, and estimates
    rho(P - J).  Returns the max violation of each identity; nothing is
    raised, callers decide what to tolerate.
    """
    E = P.entries
    n = P.n
    J = j_matrix(P)
    eye = np.eye(n)
    one = np.ones(n)
    v: dict = {}
    v["J@1 = 1"] = float(np.abs(J @ one - one).max())
    v["J@P = J"] = float(np.abs(J @ E - J).max())
    v["P@J = J"] = float(np.abs(E @ J - J).max())
    v["J@J = J"] = float(np.abs(J @ J - J).max())
    v["(I-J)^2 = I-J"] = float(np.abs((eye - J) @ (eye - J) - (eye - J)).max())
    for l in powers:
        Pl = np.linalg.matrix_power(E, l)
        for k in powers:
            lhs = np.linalg.matrix_power(Pl - J, k)
            rhs = np.linalg.matrix_power(E, l * k) - J
            v[f"(P^{l}-J)^{k} = P^{l * k}-J"] = float(np.abs(lhs - rhs).max())
    rho = float(np.abs(np.linalg.eigvals(E - J)).max()) if n > 1 else 0.0
    return JPropertyReport(violations=v, rho=rho)


def sigma_hat(
    P: StochasticMatrix,
    noise: NoiseCovariance,
    *,
    hitting_sq: np.ndarray | None = None,
) -> np.ndarray:
    """Closed-form steady-state covariance companion matrix.

    Sigma_hat = -H D Sigma D + 1 pi' H D Sigma D, with H the hitting times
    of P^2 and D = diag(pi).  Satisfies Tr(Sigma_hat) = delta_ss,
    J Sigma_hat = 0, and the fixed point
    Sigma_hat = P^2 Sigma_hat + (I - J) Sigma_w D.
    """
    _check_noise(P, noise)
    _require_closed_form(P)
    pi = P.stationary()
    H = _hitting_sq(P, hitting_sq)
    A = (pi[:, None] * noise.matrix()) * pi[None, :]
    M = H @ A
    return np.outer(np.ones(P.n), pi @ M) - M
