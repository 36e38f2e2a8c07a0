"""Lag-stacked data matrices and the small amount of matrix algebra around them."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .datasim import Dataset

__all__ = [
    "StackedMatrix",
    "CovMatrix",
    "SingularScalingError",
    "stack_lagged",
    "sample_covariance",
    "inv_sqrt_sym",
    "direct_sum",
]

EIG_FLOOR = 1e-10


class SingularScalingError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class StackedMatrix:
    """Lagged data matrix.

    Rows come in one block per variable, output block first; block ``v`` holds
    ``[v[k], v[k-1], ..., v[k-L]]``.  Column ``j`` corresponds to ``k = L + j``.
    """

    Z: np.ndarray
    L: int
    var_layout: tuple

    @property
    def n_vars(self) -> int:
        return len(self.var_layout)

    @property
    def ncols(self) -> int:
        return self.Z.shape[1]


@dataclass(frozen=True, eq=False)
class CovMatrix:
    S: np.ndarray
    n_samples: int


def _as_rows(data):
    if isinstance(data, Dataset):
        return data.variables(), tuple(data.labels)
    X = np.atleast_2d(np.asarray(data, dtype=float))
    return X, tuple(f"x{i}" for i in range(X.shape[0]))


def stack_lagged(data, L: int, labels=None) -> StackedMatrix:
    """Stack each variable with its first ``L`` lags.

    Parameters
    ----------
    data : Dataset or array_like, shape (n_vars, N)
    L : int
        Stacking lag.
    """
    X, names = _as_rows(data)
    if labels is not None:
        names = tuple(labels)
    N = X.shape[1]
    if L < 0:
        raise ValueError("L must be non-negative")
    if L >= N:
        raise ValueError(f"stacking lag L={L} must be smaller than the record length N={N}")
    ncols = N - L
    Z = np.empty((X.shape[0] * (L + 1), ncols))
    for v in range(X.shape[0]):
        for lag in range(L + 1):
            Z[v * (L + 1) + lag] = X[v, L - lag:L - lag + ncols]
    return StackedMatrix(Z, L, names)


def sample_covariance(Z, center: bool = False) -> CovMatrix:
    """``S = Z Z^T / ncols`` (no centring unless asked)."""
    Zm = Z.Z if isinstance(Z, StackedMatrix) else np.atleast_2d(np.asarray(Z, dtype=float))
    n = Zm.shape[1]
    if n == 0:
        raise ValueError("cannot form a covariance from zero columns")
    if n < Zm.shape[0]:
        warnings.warn(
            f"fewer samples ({n}) than stacked variables ({Zm.shape[0]}); covariance is rank deficient",
            stacklevel=2,
        )
    if center:
        Zm = Zm - Zm.mean(axis=1, keepdims=True)
    S = Zm @ Zm.T / n
    S = 0.5 * (S + S.T)
    return CovMatrix(S, n)


def inv_sqrt_sym(S, floor: float = EIG_FLOOR) -> np.ndarray:
    """Symmetric inverse square root through the eigendecomposition."""
    S = S.S if isinstance(S, CovMatrix) else np.asarray(S, dtype=float)
    lam, V = linalg.eigh(0.5 * (S + S.T))
    top = lam.max() if lam.size else 0.0
    bad = np.flatnonzero(lam <= floor * max(top, 0.0))
    if top <= 0 or bad.size:
        idx = int(bad[0]) if bad.size else 0
        raise SingularScalingError(
            f"singular scaling matrix: eigenvalue #{idx} = {lam[idx]:.3g} "
            f"is below floor {floor:g} x max eigenvalue"
        )
    W = (V / np.sqrt(lam)) @ V.T
    return 0.5 * (W + W.T)


def direct_sum(blocks) -> np.ndarray:
    """Block-diagonal composition of square matrices."""
    mats = []
    for b in blocks:
        b = np.atleast_2d(np.asarray(b, dtype=float)) if np.size(b) else np.zeros((0, 0))
        if b.shape[0] != b.shape[1]:
            raise ValueError(f"direct_sum needs square blocks, got shape {b.shape}")
        mats.append(b)
    if not mats:
        return np.zeros((0, 0))
    return linalg.block_diag(*mats)
