"""Autocovariance of filtered white noise computed two ways.

The impulse-response sum and the numerical integral of the power spectrum
must agree; for the first-order filter 0.7q^-1/(1-0.9q^-1) both match the
closed form 0.49/(1-0.81) * 0.9^l.  The last part builds the coloured
error covariance of the pseudo-output used when re-identifying channel 1.
"""
import numpy as np

from misoeiv.acvf import acvf_filtered_white, build_pseudo_cov, pseudo_output_acvf, toeplitz
from misoeiv.lti import TransferFunction

G2 = TransferFunction.from_coeffs([0, 0.7], [1, -0.9])
conv = acvf_filtered_white(G2, 1.0, 5, "convolution").sigma
spec = acvf_filtered_white(G2, 1.0, 5, "spectral").sigma
closed = 0.49 / 0.19 * 0.9 ** np.arange(6)
print("lag  convolution      spectral         closed form")
for l in range(6):
    print(f"{l:3d}  {conv[l]:.12f}  {spec[l]:.12f}  {closed[l]:.12f}")

rng = np.random.default_rng(0)
worst = 0.0
for _ in range(100):
    p = rng.uniform(-0.95, 0.95, size=rng.integers(1, 4))
    H = TransferFunction.from_coeffs(rng.normal(size=3), np.poly(p))
    a = acvf_filtered_white(H, 1.0, 8, "convolution").sigma
    b = acvf_filtered_white(H, 1.0, 8, "spectral").sigma
    worst = max(worst, np.max(np.abs(a - b)))
print(f"\nlargest disagreement over 100 random stable filters: {worst:.2e}")

sig = pseudo_output_acvf(2.6868, [(G2, 0.4)], 2)
R = toeplitz(sig, 2)
print("\npseudo-output ACVF for channel 1:", sig.sigma.round(6))
print("stacked error covariance (L = 2):")
print(build_pseudo_cov(R, 0.9, 2).Sigma.round(4))
