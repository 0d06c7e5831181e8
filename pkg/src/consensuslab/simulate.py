"""Monte-Carlo simulation of the noisy consensus recursion.

Trials are reproducible and order-independent: trial k draws from its own
stream seeded by (seed, k) through numpy's SeedSequence spawning, and each
trial pre-generates its noise block in one shot, so rechunking or
parallelizing trials cannot change the numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .disagreement import NoiseCovariance
from .errors import DimensionMismatch, InvalidParam, NoConvergence
from .markov import StochasticMatrix

__all__ = [
    "SimConfig",
    "SimTrace",
    "simulate_consensus",
    "estimate_delta_ss",
    "divergence_probe",
    "auto_burn_in",
]


@dataclass(frozen=True)
class SimConfig:
    """Simulation parameters.

    ``burn_in=None`` means automatic: ceil(20 / (1 - rho^2)) steps, with
    rho the spectral radius of P - 1 pi'.  ``noise`` selects the driving
    distribution: zero-mean Gaussian, or Rademacher (+/-1, scaled to the
    same covariance) to confirm the steady state only cares about second
    moments.
    """

    horizon: int
    trials: int = 1
    burn_in: int | None = None
    seed: int = 0
    record_every: int = 1
    noise: str = "gaussian"

    def __post_init__(self):
        if self.horizon < 1:
            raise InvalidParam(f"horizon must be >= 1, got {self.horizon}")
        if self.trials < 1:
            raise InvalidParam(f"trials must be >= 1, got {self.trials}")
        if self.record_every < 1:
            raise InvalidParam(f"record_every must be >= 1, got {self.record_every}")
        if self.burn_in is not None and not (0 <= self.burn_in < self.horizon):
            raise InvalidParam(
                f"burn_in must be in [0, horizon), got {self.burn_in} vs horizon {self.horizon}"
            )
        if self.noise not in ("gaussian", "rademacher"):
            raise InvalidParam(f"noise must be 'gaussian' or 'rademacher', got {self.noise!r}")


@dataclass(frozen=True)
class SimTrace:
    """Per-step disagreement estimates averaged across trials."""

    times: np.ndarray
    delta_hat: np.ndarray
    delta_uni_hat: np.ndarray
    stderr: np.ndarray

    def to_csv(self, path=None) -> str | None:
        """Write the trace as CSV; with no path, return the text instead."""
        rows = ["t,delta_hat,delta_uni_hat,stderr"]
        for t, d, u, s in zip(self.times, self.delta_hat, self.delta_uni_hat, self.stderr):
            rows.append(f"{int(t)},{d:.16e},{u:.16e},{s:.16e}")
        text = "\n".join(rows) + "\n"
        if path is None:
            return text
        with open(path, "w") as fh:
            fh.write(text)
        return None


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(trial,)))


def _noise_block(rng, noise: NoiseCovariance, steps: int, kind: str) -> np.ndarray:
    n = noise.n
    if kind == "gaussian":
        z = rng.standard_normal((steps, n))
    else:  # rademacher
        z = rng.integers(0, 2, size=(steps, n)).astype(float) * 2.0 - 1.0
    if noise.kind == "scalar":
        return z * np.sqrt(noise.equal_variance())
    if noise.kind == "diagonal":
        return z * np.sqrt(noise.variances())[None, :]
    return z @ noise.sampling_factor().T


def _run_trials(P: StochasticMatrix, noise: NoiseCovariance, x0: np.ndarray, cfg: SimConfig):
    """Recorded weighted / uniform squared errors, shape (trials, n_rec)."""
    n = P.n
    pi = P.stationary()
    E = P.entries
    times = np.arange(0, cfg.horizon + 1, cfg.record_every)
    wsq = np.empty((cfg.trials, times.size))
    usq = np.empty((cfg.trials, times.size))
    for trial in range(cfg.trials):
        rng = _trial_rng(cfg.seed, trial)
        W = _noise_block(rng, noise, cfg.horizon, cfg.noise)
        x = x0.astype(float).copy()
        k = 0
        e = x - (pi @ x)
        wsq[trial, k] = pi @ (e * e)
        usq[trial, k] = np.mean(e * e)
        k += 1
        for t in range(1, cfg.horizon + 1):
            x = E @ x + W[t - 1]
            if t % cfg.record_every == 0:
                e = x - (pi @ x)
                wsq[trial, k] = pi @ (e * e)
                usq[trial, k] = np.mean(e * e)
                k += 1
    return times, wsq, usq


def simulate_consensus(
    P: StochasticMatrix,
    noise: NoiseCovariance,
    x0,
    cfg: SimConfig,
) -> SimTrace:
    """Run the recursion x(t+1) = P x(t) + w(t) and record disagreement.

    Returns the across-trial mean of the pi-weighted and uniform squared
    errors at every recorded step, with the standard error of the weighted
    one (zero when trials == 1).  Identical inputs give bit-identical
    output.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (P.n,):
        raise DimensionMismatch(f"x0 must have shape ({P.n},), got {x0.shape}")
    if noise.n != P.n:
        raise DimensionMismatch(
            f"noise covariance is {noise.n}-dimensional but the chain has {P.n} states"
        )
    times, wsq, usq = _run_trials(P, noise, x0, cfg)
    if cfg.trials > 1:
        stderr = wsq.std(axis=0, ddof=1) / np.sqrt(cfg.trials)
    else:
        stderr = np.zeros(times.size)
    return SimTrace(
        times=times,
        delta_hat=wsq.mean(axis=0),
        delta_uni_hat=usq.mean(axis=0),
        stderr=stderr,
    )


def _contraction_radius(P: StochasticMatrix) -> float:
    pi = P.stationary()
    if P.n == 1:
        return 0.0
    M = P.entries - np.outer(np.ones(P.n), pi)
    return float(np.abs(np.linalg.eigvals(M)).max())


def auto_burn_in(P: StochasticMatrix) -> int:
    """ceil(20 / (1 - rho^2)) with rho = rho(P - 1 pi')."""
    rho = _contraction_radius(P)
    if rho >= 1.0 - 1e-12:
        raise NoConvergence(
            "no spectral gap (rho(P - J) ~ 1); the recursion has no steady state"
        )
    return int(np.ceil(20.0 / (1.0 - rho ** 2)))


def estimate_delta_ss(
    P: StochasticMatrix,
    noise: NoiseCovariance,
    cfg: SimConfig,
) -> tuple[float, float]:
    """Tail-averaged Monte-Carlo estimate of the weighted disagreement.

    Averages the recorded weighted squared error over steps past the
    burn-in, per trial; returns (mean across trials, standard error across
    trials).  Starts from x0 = 0 — the steady state does not depend on it.
    """
    if noise.n != P.n:
        raise DimensionMismatch(
            f"noise covariance is {noise.n}-dimensional but the chain has {P.n} states"
        )
    burn = cfg.burn_in if cfg.burn_in is not None else auto_burn_in(P)
    if burn >= cfg.horizon:
        raise InvalidParam(
            f"burn-in {burn} >= horizon {cfg.horizon}; lengthen the run"
        )
    times, wsq, _ = _run_trials(P, noise, np.zeros(P.n), cfg)
    tail = times > burn
    if not tail.any():
        raise InvalidParam("no recorded steps after the burn-in; lower record_every")
    per_trial = wsq[:, tail].mean(axis=1)
    est = float(per_trial.mean())
    if cfg.trials > 1:
        se = float(per_trial.std(ddof=1) / np.sqrt(cfg.trials))
    else:
        se = 0.0
    return est, se


def divergence_probe(P: StochasticMatrix, noise: NoiseCovariance, horizon: int) -> np.ndarray:
    """Trace of the exact error covariance after each of ``horizon`` steps.

    Runs the covariance recursion itself (no sampling), so it shows cleanly
    whether the disagreement settles or keeps growing — e.g. the linear
    growth of a noisy consensus on a bipartite graph, where the simple
    walk's -1 eigenvalue never mixes.  Returns traces[t] for t = 0..horizon.
    """
    if noise.n != P.n:
        raise DimensionMismatch(
            f"noise covariance is {noise.n}-dimensional but the chain has {P.n} states"
        )
    if horizon < 1:
        raise InvalidParam(f"horizon must be >= 1, got {horizon}")
    n = P.n
    pi = P.stationary()
    J = np.outer(np.ones(n), pi)
    M = P.entries - J
    IJ = np.eye(n) - J
    N = IJ @ noise.matrix() @ IJ.T
    N = 0.5 * (N + N.T)
    traces = np.zeros(horizon + 1)
    S = np.zeros((n, n))
    for t in range(1, horizon + 1):
        S = M @ S @ M.T + N
        traces[t] = np.trace(S)
    return traces
