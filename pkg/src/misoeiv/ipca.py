"""Iterative PCA on lag-stacked data: noise variances, constraint count, order, model.

The noisy covariance of the stacked vector is modelled as ``S = S_x + Sigma``.
After the symmetric scaling ``Sigma^-1/2 S Sigma^-1/2`` every linear relation
satisfied by the noise-free data shows up as an eigenvalue of one, so the
number of relations is found by counting unity eigenvalues.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .lti import TransferFunction
from .stackcov import EIG_FLOOR, CovMatrix, SingularScalingError, StackedMatrix, direct_sum, inv_sqrt_sym, sample_covariance

__all__ = [
    "NoiseModel",
    "EigenDiagnostics",
    "DifferenceEquation",
    "IPCAResult",
    "IPCAConvergenceError",
    "ConstraintCountError",
    "scaled_eig",
    "count_unity",
    "count_constraints",
    "ipca_iterate",
    "ipca_auto",
    "estimate_order",
    "extract_difference_equation",
]

log = logging.getLogger(__name__)

UNITY_BAND = 0.3
GAP_CUT = 2.0
ZERO_TOL = 1e-8
# relative floor for variance iterates; clamped models fall below the generic eigen floor
VAR_FLOOR = 1e-8
DIAG_FLOOR = 1e-15


class IPCAConvergenceError(RuntimeError):
    """Raised when the variance iteration does not settle; ``last`` holds the final iterate."""

    def __init__(self, msg, last=None):
        super().__init__(msg)
        self.last = last


class ConstraintCountError(ValueError):
    """No linear relation was detected where at least one is required."""

    def __init__(self, msg, eigenvalues=None):
        super().__init__(msg)
        self.eigenvalues = eigenvalues


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Covariance of the stacked measurement errors.

    ``structure`` is ``"diagonal"`` (one unknown variance per variable, each
    repeated over its ``L + 1`` lags) or ``"pseudo-output"`` (a Toeplitz
    block for the coloured output error next to ``sigma2_u * I``).
    """

    structure: str
    params: dict
    Sigma: np.ndarray

    @classmethod
    def diagonal(cls, variances, L: int) -> "NoiseModel":
        v = np.asarray(variances, dtype=float)
        Sigma = direct_sum([vi * np.eye(L + 1) for vi in v])
        return cls("diagonal", {"variances": v, "L": L}, Sigma)

    @property
    def variances(self):
        return self.params.get("variances")


@dataclass(eq=False)
class EigenDiagnostics:
    eigenvalues: np.ndarray
    L: int
    d: int | None = None
    eta: int | None = None
    eigenvectors: np.ndarray | None = field(default=None, repr=False)
    scaling: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self):
        return {"eigenvalues": self.eigenvalues.tolist(), "L": self.L, "d": self.d, "eta": self.eta}


@dataclass(eq=False)
class DifferenceEquation:
    """``y[k] + sum_i a_i y[k-i] = sum_r sum_j b_rj u_r[k-j]``."""

    a: np.ndarray
    b: list
    eta: int
    var_layout: tuple = ()

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = [np.asarray(bi, dtype=float) for bi in self.b]
        if abs(self.a[0] - 1.0) > 1e-12:
            raise ValueError("a0 must be 1")
        if not (np.all(np.isfinite(self.a)) and all(np.all(np.isfinite(bi)) for bi in self.b)):
            raise ValueError("non-finite coefficient")

    @property
    def n_inputs(self):
        return len(self.b)

    def as_vector(self):
        """``[a0..a_eta, b1_0..b1_eta, ...]``."""
        return np.concatenate([self.a] + self.b)

    def channel_tf(self, r: int) -> TransferFunction:
        """``B_r / A`` over the common denominator (no cancellation)."""
        return TransferFunction.from_coeffs(self.b[r], self.a)

    def to_dict(self):
        return {"a": self.a.tolist(), "b": [bi.tolist() for bi in self.b], "eta": self.eta}


def scaled_eig(S, noise, floor: float = EIG_FLOOR) -> EigenDiagnostics:
    """Eigenpairs of ``Sigma^-1/2 S Sigma^-1/2`` in descending order."""
    S = S.S if isinstance(S, CovMatrix) else np.asarray(S, dtype=float)
    Sigma = noise.Sigma if isinstance(noise, NoiseModel) else np.asarray(noise, dtype=float)
    if S.shape != Sigma.shape:
        raise ValueError(f"covariance {S.shape} and noise model {Sigma.shape} differ in size")
    W = inv_sqrt_sym(Sigma, floor)
    Ss = W @ S @ W
    lam, V = linalg.eigh(0.5 * (Ss + Ss.T))
    order = np.argsort(lam)[::-1]
    L = (noise.params.get("L") if isinstance(noise, NoiseModel) else None)
    return EigenDiagnostics(lam[order], L if L is not None else -1, eigenvectors=V[:, order], scaling=W)


def count_unity(eigs, gap_cut: float = GAP_CUT, band: float = UNITY_BAND) -> int:
    """Size of the trailing eigenvalue cluster sitting at one.

    The cluster is the longest suffix lying inside ``[1/(1+band), 1+band]``
    whose first member is at least ``gap_cut`` times smaller than the
    eigenvalue just above it.
    """
    e = np.asarray(eigs, dtype=float)
    n = e.size
    lo, hi = 1.0 / (1.0 + band), 1.0 + band
    inside = (e >= lo) & (e <= hi)
    best = 0
    for k in range(1, n + 1):
        if not inside[n - k]:
            break
        if k == n or e[n - k - 1] >= gap_cut * e[n - k]:
            best = k
    return best


def count_constraints(eigs, gap_cut: float = GAP_CUT, band: float = UNITY_BAND, zero_tol: float = ZERO_TOL) -> int:
    """Unity count, falling back to the number of numerically zero eigenvalues.

    The fallback only triggers on (near) noise-free records, where the
    variance estimates collapse to their floor and the relations show up as
    zeros instead of ones.
    """
    d = count_unity(eigs, gap_cut, band)
    if d:
        return d
    e = np.asarray(eigs, dtype=float)
    if not e.size or e[0] <= 0:
        return 0
    # a relation of noise-free data sits far below the signal and also below
    # the unity band by at least the gap factor; the relative test alone is
    # fooled by a single variance on its floor, which inflates e[0]
    below_band = 1.0 / ((1.0 + band) * gap_cut)
    return int(np.sum((e < zero_tol * e[0]) & (e < below_band)))


def estimate_order(L: int, d: int) -> int:
    if d < 1:
        raise ConstraintCountError("no constraints found; increase L or N")
    if L < d - 1:
        raise ValueError(f"d={d} constraints are impossible at L={L}")
    return L - d + 1


@dataclass(eq=False)
class IPCAResult:
    noise: NoiseModel
    constraints: np.ndarray  # d x M, unscaled
    eigen: EigenDiagnostics
    n_iter: int
    converged: bool
    clamped: list = field(default_factory=list)


def _block_sample_variance(Z: StackedMatrix):
    L = Z.L
    rows = Z.Z[:: L + 1]
    return np.mean(rows**2, axis=1)


def _vech_system(A, S, n_vars, L):
    """Linear system ``vech(A S A^T) = sum_m theta_m vech(A E_m A^T)``."""
    d = A.shape[0]
    iu = np.triu_indices(d)
    rhs = (A @ S @ A.T)[iu]
    cols = []
    for m in range(n_vars):
        Am = A[:, m * (L + 1):(m + 1) * (L + 1)]
        cols.append((Am @ Am.T)[iu])
    return np.column_stack(cols), rhs


def ipca_iterate(Z: StackedMatrix, d: int, tol: float = 1e-6, max_iter: int = 200,
                 init=None, S=None, relax: float = 0.5) -> IPCAResult:
    """Alternate constraint extraction and per-variable variance estimation.

    Each sweep takes the ``d`` trailing scaled eigenvectors as constraints,
    maps them back to the measurement space, and refits the variances by
    least squares so that the constraint residual covariance matches the
    one implied by the noise model.  The refit is blended with the previous
    iterate (``relax`` is the weight kept on the old value); the undamped
    map has the same fixed points but tends to oscillate.

    Variances are kept at or above ``VAR_FLOOR`` times the sample variance of
    their variable by solving the refit as a bound-constrained least-squares
    problem; a variable that ends on that floor is reported in ``clamped``
    and a ``RuntimeWarning`` is issued.

    Raises
    ------
    IPCAConvergenceError
        When ``max_iter`` sweeps do not converge.
    """
    M = Z.Z.shape[0]
    n_vars, L = Z.n_vars, Z.L
    if not 1 <= d < M:
        raise ValueError(f"need 1 <= d < {M}, got d={d}")
    if S is None:
        S = sample_covariance(Z).S
    sv = _block_sample_variance(Z)
    sv = np.where(sv > 0, sv, 1.0)
    floor = VAR_FLOOR * sv
    theta = sv / 10.0 if init is None else np.maximum(np.asarray(init, float), floor)
    for it in range(1, max_iter + 1):
        noise = NoiseModel.diagonal(theta, L)
        eig = scaled_eig(S, noise, DIAG_FLOOR)
        A = eig.eigenvectors[:, M - d:].T @ eig.scaling
        G, rhs = _vech_system(A, S, n_vars, L)
        new = optimize.lsq_linear(G, rhs, bounds=(floor, np.inf), method="bvls").x
        new = np.maximum(new, floor)
        change = np.max(np.abs(new - theta) / np.maximum(np.abs(new), floor))
        theta = relax * theta + (1.0 - relax) * new
        if change < tol:
            theta = new
            noise = NoiseModel.diagonal(theta, L)
            eig = scaled_eig(S, noise, DIAG_FLOOR)
            eig.L = L
            A = eig.eigenvectors[:, M - d:].T @ eig.scaling
            clamped = np.flatnonzero(theta <= floor * (1 + 1e-9)).tolist()
            if clamped:
                warnings.warn(
                    f"IPCA variance(s) of variable(s) {clamped} clamped at the floor",
                    RuntimeWarning,
                    stacklevel=2,
                )
            return IPCAResult(noise, A, eig, it, True, clamped)
    raise IPCAConvergenceError(f"IPCA did not converge in {max_iter} sweeps", last=theta)


def ipca_auto(Z: StackedMatrix, tol: float = 1e-6, max_iter: int = 200,
              gap_cut: float = GAP_CUT, band: float = UNITY_BAND, d_override: int | None = None) -> IPCAResult:
    """IPCA with the number of relations chosen from the data.

    Candidates ``d`` are tried in increasing order and the first one whose
    converged spectrum shows exactly ``d`` relations wins.  Only
    over-identified candidates are eligible: with ``d (d + 1) / 2`` residual
    moments equal to the number of unknown variances the fit is exact, the
    trailing ``d`` eigenvalues are one by construction and the check is void.
    Candidates stop at ``d = L`` so that the implied order ``L - d + 1`` is at
    least one.
    """
    M = Z.Z.shape[0]
    n_vars = Z.n_vars
    S = sample_covariance(Z).S
    if d_override is not None:
        res = ipca_iterate(Z, d_override, tol, max_iter, S=S)
        res.eigen.d = d_override
        return res
    # at most L relations: every accepted fit must leave a dynamic model of order >= 1
    candidates = [d for d in range(1, min(M, Z.L + 1)) if d * (d + 1) // 2 > n_vars]
    tried = []
    for d in candidates:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                res = ipca_iterate(Z, d, tol, max_iter, S=S)
        except (IPCAConvergenceError, SingularScalingError) as exc:
            tried.append((d, None, str(exc)))
            continue
        found = count_constraints(res.eigen.eigenvalues, gap_cut, band)
        tried.append((d, found, res.eigen.eigenvalues))
        if found == d:
            res.eigen.d = d
            if res.clamped:
                warnings.warn("IPCA variances were clamped at their floor", RuntimeWarning, stacklevel=2)
            return res
    last = next((t[2] for t in reversed(tried) if t[1] is not None), None)
    raise ConstraintCountError(
        f"no self-consistent number of relations at L={Z.L} (tried d={[t[0] for t in tried]}); "
        "increase L or N",
        eigenvalues=last,
    )


def extract_difference_equation(eigvec_scaled, noise, var_layout, eta: int,
                                 scaling=None) -> DifferenceEquation:
    """Turn a scaled constraint eigenvector into difference-equation coefficients.

    The vector is mapped back with ``Sigma^-1/2``, split into one block of
    ``eta + 1`` lags per variable (output first) and normalised so that the
    ``y[k]`` coefficient is one.  Input coefficients change sign when moved to
    the right-hand side.
    """
    v = np.asarray(eigvec_scaled, dtype=float).ravel()
    W = scaling if scaling is not None else inv_sqrt_sym(
        noise.Sigma if isinstance(noise, NoiseModel) else noise)
    c = W @ v
    n_vars = len(var_layout)
    if c.size != n_vars * (eta + 1):
        raise ValueError(f"vector of length {c.size} does not match {n_vars} blocks of {eta + 1}")
    if abs(c[0]) < 1e-8 * max(np.max(np.abs(c)), 1e-300):
        raise ValueError("degenerate normalization: y[k] coefficient vanishes")
    c = c / c[0]
    blocks = c.reshape(n_vars, eta + 1)
    return DifferenceEquation(blocks[0], [-blk for blk in blocks[1:]], eta, tuple(var_layout))
