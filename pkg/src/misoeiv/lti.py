"""Discrete-time LTI primitives in the backward-shift operator q^-1.

Polynomials are stored in ascending powers of q^-1, i.e. ``coeffs[k]`` is the
coefficient of q^-k.  A leading run of zero numerator coefficients encodes the
input delay.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

__all__ = [
    "Polynomial",
    "TransferFunction",
    "PoleZeroSet",
    "filter",
    "impulse_response",
    "frequency_response",
    "pole_zero",
]

NEAR_CANCEL_FACTOR = 0.02


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Polynomial c0 + c1 q^-1 + ... + cn q^-n."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float)).copy()
        if c.ndim != 1 or c.size == 0:
            raise ValueError("polynomial needs a non-empty 1-d coefficient sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def trim(self, tol: float = 0.0) -> "Polynomial":
        """Drop trailing coefficients with magnitude <= tol (keeps at least c0)."""
        c = self.coeffs
        n = c.size
        while n > 1 and abs(c[n - 1]) <= tol:
            n -= 1
        return Polynomial(c[:n])

    def __call__(self, qinv):
        """Evaluate at a value of q^-1 (scalar or array)."""
        qinv = np.asarray(qinv)
        out = np.zeros(qinv.shape, dtype=np.result_type(qinv, float))
        for c in self.coeffs[::-1]:
            out = out * qinv + c
        return out[()] if out.ndim == 0 else out

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(np.convolve(self.coeffs, other.coeffs))

    def __repr__(self):
        return f"Polynomial({self.coeffs.tolist()})"


@dataclass(frozen=True, eq=False)
class TransferFunction:
    """Rational model B(q^-1)/A(q^-1) with A normalised so that a0 == 1."""

    num: Polynomial
    den: Polynomial = field(default_factory=lambda: Polynomial([1.0]))

    def __post_init__(self):
        num = self.num if isinstance(self.num, Polynomial) else Polynomial(self.num)
        den = self.den if isinstance(self.den, Polynomial) else Polynomial(self.den)
        if not np.any(den.coeffs):
            raise ValueError("denominator is identically zero")
        a0 = den.coeffs[0]
        if a0 == 0:
            raise ValueError("denominator must have a non-zero constant term")
        if a0 != 1.0:
            num = Polynomial(num.coeffs / a0)
            den = Polynomial(den.coeffs / a0)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @classmethod
    def from_coeffs(cls, num, den=(1.0,)) -> "TransferFunction":
        return cls(Polynomial(num), Polynomial(den))

    @property
    def delay(self) -> int:
        """Number of leading zero numerator coefficients."""
        nz = np.flatnonzero(self.num.coeffs)
        return int(nz[0]) if nz.size else self.num.coeffs.size

    @property
    def order(self) -> int:
        return self.den.trim().degree

    def poles_inside(self, radius: float = 1.0) -> bool:
        p = pole_zero(self).poles
        return bool(np.all(np.abs(p) < radius))

    def to_dict(self) -> dict:
        return {"num": self.num.coeffs.tolist(), "den": self.den.coeffs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "TransferFunction":
        return cls.from_coeffs(d["num"], d["den"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "TransferFunction":
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        return f"TransferFunction(num={self.num.coeffs.tolist()}, den={self.den.coeffs.tolist()})"


@dataclass(frozen=True)
class PoleZeroSet:
    """Factorised form ``gain * q^-delay * prod(1 - z q^-1) / prod(1 - p q^-1)``.

    ``gain`` is the first non-zero numerator coefficient, so that every
    factor is monic in q^-1.  Zeros at the origin are not listed; they are
    counted by ``delay``.
    """

    poles: np.ndarray
    zeros: np.ndarray
    gain: float
    delay: int = 0

    def near_cancellations(self, factor: float = NEAR_CANCEL_FACTOR):
        """Pole/zero pairs with ``|p - z| < factor * (1 + |p|)``."""
        pairs = []
        for p in self.poles:
            for z in self.zeros:
                if abs(p - z) < factor * (1 + abs(p)):
                    pairs.append((complex(p), complex(z)))
        return pairs

    def coincident(self, tol: float = 1e-9):
        return [
            (complex(p), complex(z))
            for p in self.poles
            for z in self.zeros
            if abs(p - z) < tol
        ]

    def evaluate(self, omega):
        """Rebuild the frequency response from the factors."""
        w = np.exp(-1j * np.asarray(omega, dtype=float))
        out = self.gain * w**self.delay
        for z in self.zeros:
            out = out * (1 - z * w)
        for p in self.poles:
            out = out / (1 - p * w)
        return out


def _check_sequence(u):
    u = np.asarray(u, dtype=float)
    if u.ndim != 1:
        raise ValueError("expected a 1-d sequence")
    if u.size == 0:
        raise ValueError("empty sequence")
    return u


def filter(tf: TransferFunction, u):
    """Run ``y = B/A u`` from rest (zero initial conditions).

    Stability is not checked.
    """
    u = _check_sequence(u)
    return signal.lfilter(tf.num.coeffs, tf.den.coeffs, u)


def impulse_response(tf: TransferFunction, n: int):
    if n < 1:
        raise ValueError("impulse response length must be >= 1")
    imp = np.zeros(n)
    imp[0] = 1.0
    return filter(tf, imp)


def frequency_response(tf: TransferFunction, omega):
    """Evaluate ``B(e^{-jw}) / A(e^{-jw})``."""
    omega = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega)):
        raise ValueError("omega must be finite")
    w = np.exp(-1j * omega)
    den = tf.den(w)
    if np.any(np.abs(den) < 1e-14):
        bad = np.atleast_1d(omega)[np.abs(np.atleast_1d(den)) < 1e-14][0]
        raise ZeroDivisionError(f"pole on unit circle at omega={bad:g}")
    return tf.num(w) / den


def _roots_qinv(c):
    """Roots (in the z-plane) of c0 + c1 z^-1 + ... + cn z^-n with c0 != 0.

    Multiplying by z^n gives the ordinary polynomial c0 z^n + ... + cn,
    whose roots are the eigenvalues of its companion matrix.
    """
    c = np.trim_zeros(np.asarray(c, dtype=float), "b")
    if c.size <= 1:
        return np.zeros(0, dtype=complex)
    comp = np.zeros((c.size - 1, c.size - 1))
    comp[0, :] = -c[1:] / c[0]
    comp[1:, :-1] = np.eye(c.size - 2)
    return np.linalg.eigvals(comp).astype(complex)


def pole_zero(tf: TransferFunction) -> PoleZeroSet:
    num = tf.num.trim()
    den = tf.den.trim()
    if not np.any(num.coeffs):
        return PoleZeroSet(_roots_qinv(den.coeffs), np.zeros(0, complex), 0.0, 0)
    delay = int(np.flatnonzero(num.coeffs)[0])
    b = num.coeffs[delay:]
    poles = _roots_qinv(den.coeffs)
    zeros = _roots_qinv(b)
    return PoleZeroSet(poles=poles, zeros=zeros, gain=float(b[0]), delay=delay)
