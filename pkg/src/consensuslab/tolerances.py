"""Numerical tolerances, in one place.

Every check in the package reads its default from here; functions that
enforce a tolerance also take it as a keyword argument, so callers can
override per call without touching module state.  Scaled tolerances note
their scale factor in the comment.
"""

ROW_SUM_TOL = 1e-12
"""|row sum - 1| allowed for a stochastic matrix."""

STATIONARY_RESIDUAL_TOL = 1e-10
"""||pi' P - pi'||_inf allowed after the stationary-distribution solve."""

REVERSIBILITY_RTOL = 1e-10
"""Detailed-balance check, relative to max_ij pi_i P_ij."""

SYMMETRY_RTOL = 1e-12
"""Matrix-symmetry check, relative to max |entry|."""

HITTING_RESIDUAL_TOL = 1e-9
"""Hitting-time defining-equation residual, scaled by n."""

RANDOM_TARGET_TOL = 1e-9
"""Start-independence of sum_j pi_j H(i -> j), scaled by (1 + K)."""

KEMENY_CROSS_RTOL = 1e-8
"""Relative disagreement allowed between the combinatorial and spectral
Kemeny constants."""

SPECTRAL_IMAG_TOL = 1e-9
"""Imaginary residue allowed when summing a (possibly complex) spectrum."""

PSD_SHIFT_SCALE = 1e-12
"""Shifted-Cholesky PSD test: the shift is PSD_SHIFT_SCALE * trace / n."""

ORACLE_TOL = 1e-12
"""Stopping tolerance of the covariance fixed-point iteration."""

CONSISTENCY_TOL = 1e-9
"""Max residual of the offset least-squares solve for a formation to be
declared consistent."""
