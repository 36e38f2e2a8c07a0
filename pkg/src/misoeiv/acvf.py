"""Autocovariance of filtered white noise and the coloured pseudo-output error model.

For ``v = H(q^-1) e`` with white ``e`` of variance ``s2`` the spectral density is
``|H(e^{-jw})|^2 s2 / (2 pi)`` and the autocovariance is its inverse Fourier
transform.  The same numbers follow from ``s2 * sum_k h[k] h[k+l]``; both
routes are implemented so each can check the other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .ipca import NoiseModel
from .lti import TransferFunction, frequency_response, impulse_response, pole_zero
from .stackcov import direct_sum

__all__ = [
    "ACVFSequence",
    "UnstableFilterError",
    "acvf_filtered_white",
    "pseudo_output_acvf",
    "toeplitz",
    "build_pseudo_cov",
]

SPECTRAL_GRID = 4096
SPECTRAL_TOL = 1e-10
TAIL_TOL = 1e-12
AGREE_TOL = 1e-8


class UnstableFilterError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ACVFSequence:
    """Autocovariance values at lags ``0..lmax`` (negative lags by symmetry)."""

    sigma: np.ndarray
    source: str = ""

    @property
    def lmax(self) -> int:
        return self.sigma.size - 1

    def __add__(self, other: "ACVFSequence") -> "ACVFSequence":
        n = min(self.sigma.size, other.sigma.size)
        return ACVFSequence(self.sigma[:n] + other.sigma[:n], f"{self.source} + {other.source}")

    def to_csv(self, path):
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write("lag,value\n")
            for lag, v in enumerate(self.sigma):
                fh.write(f"{lag},{v:.17g}\n")


def _max_pole_radius(H: TransferFunction) -> float:
    p = pole_zero(H).poles
    return float(np.max(np.abs(p))) if p.size else 0.0


def _acvf_convolution(H: TransferFunction, sigma2: float, lmax: int, rho: float):
    nb = H.num.coeffs.size
    if rho == 0.0:
        n = nb + lmax + 1
        h = impulse_response(H, n)
    else:
        # lengthen until the geometric tail bound on sum h^2 is negligible
        n = max(64, nb + lmax + 1, H.den.coeffs.size * 4)
        while True:
            h = impulse_response(H, n)
            energy = np.dot(h, h)
            win = max(H.den.coeffs.size, 8)
            last = np.max(h[-win:] ** 2)
            tail = last * rho**2 / (1.0 - rho**2) * win
            if energy == 0.0 or tail < TAIL_TOL * energy:
                break
            n *= 2
    sig = np.array([np.dot(h[: h.size - l], h[l:]) if l < h.size else 0.0 for l in range(lmax + 1)])
    return sigma2 * sig


def _acvf_spectral(H: TransferFunction, sigma2: float, lmax: int):
    lags = np.arange(lmax + 1)
    m = SPECTRAL_GRID
    prev = None
    while True:
        # trapezoid on a periodic integrand == plain mean over a uniform grid
        w = -np.pi + 2 * np.pi * np.arange(m) / m
        g = np.abs(frequency_response(H, w)) ** 2
        cur = sigma2 * (np.cos(np.outer(lags, w)) @ g) / m
        if prev is not None and np.max(np.abs(cur - prev)) < SPECTRAL_TOL:
            return cur
        if m > 2**22:
            return cur
        prev = cur
        m *= 2


def acvf_filtered_white(H: TransferFunction, sigma2: float, lmax: int,
                        method: str = "convolution", check: bool = False) -> ACVFSequence:
    """ACVF of ``H(q^-1) e`` with ``var(e) = sigma2``.

    Parameters
    ----------
    method : {"convolution", "spectral"}
        ``convolution`` sums lagged products of the impulse response;
        ``spectral`` integrates the power spectrum.
    check : bool
        Run both methods and raise ``AssertionError`` unless they agree to 1e-8.
    """
    if sigma2 < 0:
        raise ValueError("variance must be non-negative")
    if lmax < 0:
        raise ValueError("lmax must be non-negative")
    rho = _max_pole_radius(H)
    if rho >= 1.0:
        raise UnstableFilterError("ACVF undefined for unstable filter")
    if method == "convolution":
        sig = _acvf_convolution(H, sigma2, lmax, rho)
    elif method == "spectral":
        sig = _acvf_spectral(H, sigma2, lmax)
    else:
        raise ValueError(f"unknown ACVF method {method!r}")
    if check:
        other = _acvf_spectral(H, sigma2, lmax) if method == "convolution" else _acvf_convolution(H, sigma2, lmax, rho)
        err = np.max(np.abs(sig - other))
        if err > AGREE_TOL:
            raise AssertionError(f"spectral and convolution ACVF differ by {err:.3g}")
    src = f"H={H.num.coeffs.tolist()}/{H.den.coeffs.tolist()}, var={sigma2:g}"
    return ACVFSequence(sig, src)


def pseudo_output_acvf(sigma2_y: float, others, lmax: int, method: str = "convolution") -> ACVFSequence:
    """ACVF of ``e_y - sum_r G_r e_ur`` for mutually independent white errors.

    ``others`` is a sequence of ``(G_r, sigma2_ur)`` pairs.
    """
    sig = np.zeros(lmax + 1)
    sig[0] = sigma2_y
    parts = [f"white var={sigma2_y:g}"]
    for G, s2 in others:
        a = acvf_filtered_white(G, s2, lmax, method)
        sig += a.sigma
        parts.append(a.source)
    return ACVFSequence(sig, " + ".join(parts))


def toeplitz(acvf, L: int) -> np.ndarray:
    sig = acvf.sigma if isinstance(acvf, ACVFSequence) else np.asarray(acvf, dtype=float)
    if sig.size < L + 1:
        raise ValueError(f"ACVF has lags up to {sig.size - 1}, need {L}")
    return linalg.toeplitz(sig[: L + 1])


def build_pseudo_cov(R, sigma2_ui: float, L: int) -> NoiseModel:
    """``R (+) sigma2_ui I_{L+1}``: stacked error covariance for (pseudo-output, input)."""
    R = np.asarray(R, dtype=float)
    if R.shape != (L + 1, L + 1):
        raise ValueError(f"R must be {(L + 1, L + 1)}, got {R.shape}")
    if not np.allclose(R, R.T, atol=1e-12 * max(1.0, np.abs(R).max())):
        raise ValueError("R is not symmetric")
    tr = np.trace(R)
    lam_min = np.linalg.eigvalsh(R).min()
    if lam_min < -1e-10 * abs(tr):
        raise ValueError(f"R is not positive semidefinite (min eigenvalue {lam_min:.3g})")
    if not sigma2_ui > 0:
        raise ValueError("input error variance must be positive")
    Sigma = direct_sum([R, sigma2_ui * np.eye(L + 1)])
    return NoiseModel("pseudo-output", {"R": R, "sigma2_u": float(sigma2_ui), "L": L}, Sigma)


def lags_needed(G: TransferFunction, rel: float = 1e-12, cap: int | None = None) -> int:
    """Samples until the impulse response envelope of ``G`` drops below ``rel``."""
    rho = _max_pole_radius(G)
    base = G.num.coeffs.size + G.den.coeffs.size
    if rho == 0.0:
        n = base
    elif rho >= 1.0:
        n = cap if cap is not None else base
    else:
        n = base + int(math.ceil(math.log(rel) / math.log(rho)))
    return n if cap is None else min(n, cap)
