"""Per-channel minimal-realisation identification of MISO errors-in-variables systems.

The overall two-step DIPCA (dynamic iterative PCA) fit returns a difference
equation whose channel transfer functions share one (non-minimal) denominator.  Each channel is then
isolated as a SISO problem: the other channels' estimated responses are
subtracted from the output, the coloured error of that pseudo-output is
described through its autocovariance, and DIPCA is rerun on the pair with the
known error covariance.  Insignificant coefficients are removed using
parametric-bootstrap standard errors.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .acvf import ACVFSequence, build_pseudo_cov, lags_needed, pseudo_output_acvf, toeplitz
from .datasim import Dataset
from .ipca import (
    ConstraintCountError,
    DifferenceEquation,
    EigenDiagnostics,
    NoiseModel,
    count_constraints,
    estimate_order,
    extract_difference_equation,
    ipca_auto,
    scaled_eig,
)
from .lti import TransferFunction, filter, pole_zero
from .stackcov import sample_covariance, stack_lagged

__all__ = [
    "PipelineConfig",
    "OverallFit",
    "ChannelNoise",
    "ChannelEstimate",
    "IdentificationReport",
    "IdentificationError",
    "PruneResult",
    "dipca_overall",
    "compute_pseudo_output",
    "fit_channel_at_order",
    "bootstrap_channel_stderr",
    "significance_prune",
    "identify_channel",
    "identify_miso_minimal",
]

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    L: int = 5
    L_chan: int = 2
    tol: float = 1e-6
    max_iter: int = 200
    band: float = 0.3
    gap_cut: float = 2.0
    z: float = 1.96
    bootstrap: int = 100
    seed: int = 0
    acvf_method: str = "convolution"
    iterate: bool = False
    d_override: int | None = None
    center: bool = False
    warmup: int | None = None  # None: derived from the subtracted channels' decay


class IdentificationError(RuntimeError):
    """Failure inside the pipeline; ``stage`` names the step, ``cause`` the original error."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause

    @property
    def unidentifiable(self) -> bool:
        return isinstance(self.cause, ConstraintCountError)


@dataclass(eq=False)
class OverallFit:
    model: DifferenceEquation
    variances: np.ndarray
    eigen: EigenDiagnostics
    eigen_fit: EigenDiagnostics
    n_iter: int = 0


def _stack(data, L, center):
    Z = stack_lagged(data, L)
    return Z, sample_covariance(Z, center=center).S


def dipca_overall(data: Dataset, L: int = 5, cfg: PipelineConfig | None = None) -> OverallFit:
    """Two-step DIPCA on all variables.

    Step one runs IPCA at lag ``L`` and reads the order off the number of
    unity eigenvalues; step two restacks at that order, scales with the
    estimated variances and takes the minimum-eigenvalue eigenvector.
    """
    cfg = cfg or PipelineConfig(L=L)
    Z, _ = _stack(data, L, cfg.center)
    res = ipca_auto(Z, cfg.tol, cfg.max_iter, cfg.gap_cut, cfg.band, cfg.d_override)
    eta = estimate_order(L, res.eigen.d)
    res.eigen.eta = eta
    variances = res.noise.variances
    Z2, S2 = _stack(data, eta, cfg.center)
    noise2 = NoiseModel.diagonal(variances, eta)
    eig2 = scaled_eig(S2, noise2, 1e-15)
    eig2.L = eta
    eig2.d = count_constraints(eig2.eigenvalues, cfg.gap_cut, cfg.band)
    if eig2.d != 1:
        warnings.warn(
            f"expected one relation at the estimated order {eta}, found {eig2.d}; "
            "using the minimum-eigenvalue vector",
            RuntimeWarning,
            stacklevel=2,
        )
    model = extract_difference_equation(eig2.eigenvectors[:, -1], noise2, Z2.var_layout, eta, eig2.scaling)
    return OverallFit(model, np.asarray(variances), res.eigen, eig2, res.n_iter)


def compute_pseudo_output(data: Dataset, model: DifferenceEquation, i: int, channels=None):
    """Output with every channel except ``i`` subtracted (zero initial conditions).

    ``channels`` optionally replaces the common-denominator transfer
    functions of ``model``.
    """
    nU = data.n_inputs
    if not 0 <= i < nU:
        raise IndexError(f"channel index {i} out of range for {nU} inputs")
    y_i = data.y.copy()
    for r in range(nU):
        if r == i:
            continue
        G = channels[r] if channels is not None else model.channel_tf(r)
        y_i -= filter(G, data.u[r])
    return y_i


@dataclass(eq=False)
class ChannelNoise:
    """Error description of a (pseudo-output, input) pair.

    The pseudo-output error is ``e_y - sum_r G_r e_ur`` over the subtracted
    channels ``others = [(G_r, var_r), ...]``.
    """

    sigma2_y: float
    others: list
    sigma2_u: float
    method: str = "convolution"

    def acvf(self, lmax) -> ACVFSequence:
        return pseudo_output_acvf(self.sigma2_y, self.others, lmax, self.method)

    def model(self, L) -> NoiseModel:
        return build_pseudo_cov(toeplitz(self.acvf(L), L), self.sigma2_u, L)


def fit_channel_at_order(y_i, u_i, noise: ChannelNoise, eta: int, center: bool = False):
    """Restack at ``eta``, scale by the pseudo-output covariance, take the smallest eigenvector."""
    Z, S = _stack(np.vstack([y_i, u_i]), eta, center)
    nm = noise.model(eta)
    eig = scaled_eig(S, nm)
    eig.L = eta
    de = extract_difference_equation(eig.eigenvectors[:, -1], nm, ("y", "u"), eta, eig.scaling)
    return de, eig


def bootstrap_channel_stderr(de: DifferenceEquation, noise: ChannelNoise, n: int, input_power: float,
                             B: int = 100, seed=0, burn_in: int = 200, center: bool = False):
    """Parametric-bootstrap standard errors of ``[a_1..a_eta, b_0..b_eta]``.

    Each replicate draws a white Gaussian noise-free input with power
    ``input_power - sigma2_u``, passes it through the fitted channel, adds
    white input error and the coloured pseudo-output error built from the
    same variances and subtracted channels, and refits at the same order.
    """
    eta = de.eta
    G = de.channel_tf(0)
    u_var = max(input_power - noise.sigma2_u, 1e-12 * max(input_power, 1e-300))
    draws = np.empty((B, 2 * eta + 1))
    streams = np.random.SeedSequence(seed).spawn(B)
    m = n + burn_in
    for k, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        u_star = np.sqrt(u_var) * rng.standard_normal(m)
        y = filter(G, u_star)
        y += np.sqrt(noise.sigma2_y) * rng.standard_normal(m)
        for Gr, s2 in noise.others:
            y -= filter(Gr, np.sqrt(s2) * rng.standard_normal(m))
        u = u_star + np.sqrt(noise.sigma2_u) * rng.standard_normal(m)
        fit, _ = fit_channel_at_order(y[burn_in:], u[burn_in:], noise, eta, center)
        draws[k] = np.concatenate([fit.a[1:], fit.b[0]])
    se = draws.std(axis=0, ddof=1) if B > 1 else np.zeros(draws.shape[1])
    return se[:eta], se[eta:]


@dataclass(eq=False)
class PruneResult:
    a: np.ndarray
    b: np.ndarray
    delay: int
    drop_order: bool


def significance_prune(a, b, a_se, b_se, z: float = 1.96) -> PruneResult:
    """Zero numerator terms with ``|coef| < z * stderr``.

    ``a`` includes the leading one and ``a_se`` covers ``a[1:]``.  Denominator
    terms are never zeroed; an insignificant trailing ``a_eta`` (with
    ``eta > 1``) only sets ``drop_order`` so the caller can refit one order
    lower.
    """
    a = np.asarray(a, dtype=float).copy()
    b = np.asarray(b, dtype=float).copy()
    a_se = np.asarray(a_se, dtype=float)
    b_se = np.asarray(b_se, dtype=float)
    keep = np.abs(b) >= z * b_se
    b = np.where(keep, b, 0.0)
    if not np.any(b):
        raise ValueError("channel has no significant response")
    delay = int(np.flatnonzero(b)[0])
    eta = a.size - 1
    drop = eta > 1 and abs(a[-1]) < z * a_se[-1]
    return PruneResult(a, b, delay, bool(drop))


@dataclass(eq=False)
class ChannelEstimate:
    tf: TransferFunction
    order: int
    delay: int
    raw: DifferenceEquation
    stderr: np.ndarray  # [a_1..a_eta, b_0..b_eta] of ``raw``
    eigen: EigenDiagnostics
    eigen_fit: EigenDiagnostics
    order_detected: int = 0

    @property
    def raw_coeffs(self):
        return np.concatenate([self.raw.a[1:], self.raw.b[0]])

    def to_dict(self):
        pz = pole_zero(self.tf)
        return {
            "num": self.tf.num.coeffs.tolist(),
            "den": self.tf.den.coeffs.tolist(),
            "order": self.order,
            "delay": self.delay,
            "order_detected": self.order_detected,
            "raw": {"a": self.raw.a.tolist(), "b": self.raw.b[0].tolist()},
            "stderr": self.stderr.tolist(),
            "eigenvalues": self.eigen.eigenvalues.tolist(),
            "d": self.eigen.d,
            "L": self.eigen.L,
            "poles": [[z.real, z.imag] for z in pz.poles],
            "zeros": [[z.real, z.imag] for z in pz.zeros],
        }


def identify_channel(y_i, u_i, noise: ChannelNoise, L: int = 2, cfg: PipelineConfig | None = None,
                     seed=None) -> ChannelEstimate:
    """Order, coefficients and pruned transfer function of one channel."""
    cfg = cfg or PipelineConfig(L_chan=L)
    y_i = np.asarray(y_i, dtype=float)
    u_i = np.asarray(u_i, dtype=float)
    _, S = _stack(np.vstack([y_i, u_i]), L, cfg.center)
    eig = scaled_eig(S, noise.model(L))
    eig.L = L
    d = count_constraints(eig.eigenvalues, cfg.gap_cut, cfg.band)
    eig.d = d
    if d == 0:
        raise ConstraintCountError("channel order not identifiable at this L", eigenvalues=eig.eigenvalues)
    eta = estimate_order(L, d)
    eig.eta = eta
    detected = eta
    seed = cfg.seed if seed is None else seed
    power = float(np.mean(u_i**2))
    while True:
        de, eig_fit = fit_channel_at_order(y_i, u_i, noise, eta, cfg.center)
        if cfg.bootstrap > 1:
            a_se, b_se = bootstrap_channel_stderr(de, noise, y_i.size, power, cfg.bootstrap, seed,
                                                  center=cfg.center)
        else:
            a_se, b_se = np.zeros(eta), np.zeros(eta + 1)
        pr = significance_prune(de.a, de.b[0], a_se, b_se, cfg.z)
        if pr.drop_order:
            eta -= 1
            continue
        break
    tf = TransferFunction.from_coeffs(pr.b, pr.a)
    return ChannelEstimate(tf, eta, pr.delay, de, np.concatenate([a_se, b_se]), eig, eig_fit, detected)


@dataclass(eq=False)
class IdentificationReport:
    overall: OverallFit
    noise_variances: np.ndarray
    labels: list
    channels: list
    pseudo_acvf: list
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        ov = self.overall
        return {
            "overall": {
                "a": ov.model.a.tolist(),
                "b": [bi.tolist() for bi in ov.model.b],
                "eta": ov.model.eta,
                "eigenvalues": ov.eigen.eigenvalues.tolist(),
                "d": ov.eigen.d,
                "L": ov.eigen.L,
                "eigenvalues_fit": ov.eigen_fit.eigenvalues.tolist(),
            },
            "noise": {lab: float(v) for lab, v in zip(self.labels, self.noise_variances)},
            "channels": [c.to_dict() for c in self.channels],
            "pseudo_acvf": [a.sigma.tolist() for a in self.pseudo_acvf],
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    def summary(self) -> str:
        lines = []
        ov = self.overall
        lines.append(f"overall order eta = {ov.model.eta} (L = {ov.eigen.L}, d = {ov.eigen.d})")
        lines.append("  scaled eigenvalues: " + " ".join(f"{v:.4g}" for v in ov.eigen.eigenvalues))
        lines.append("  a = " + " ".join(f"{v:+.4f}" for v in ov.model.a))
        for r, bi in enumerate(ov.model.b):
            lab = self.labels[r + 1]
            lines.append(f"  b[{lab}] = " + " ".join(f"{v:+.4f}" for v in bi))
            pz = pole_zero(ov.model.channel_tf(r))
            lines.append(f"    factorised: {_fmt_factors(pz)}")
        lines.append("noise variances: " + ", ".join(
            f"{lab}={v:.4g}" for lab, v in zip(self.labels, self.noise_variances)))
        for i, ch in enumerate(self.channels):
            lab = self.labels[i + 1]
            lines.append(f"channel {lab}: order {ch.order}, delay {ch.delay}")
            lines.append(f"  G = [{_fmt_poly(ch.tf.num.coeffs)}] / [{_fmt_poly(ch.tf.den.coeffs)}]")
            lines.append(f"  factorised: {_fmt_factors(pole_zero(ch.tf))}")
            lines.append("  scaled eigenvalues: " + " ".join(f"{v:.4g}" for v in ch.eigen.eigenvalues))
        return "\n".join(lines)


def _fmt_poly(c):
    terms = []
    for k, v in enumerate(c):
        if v == 0:
            continue
        terms.append(f"{v:+.4f}" + (f" q^-{k}" if k else ""))
    return " ".join(terms) if terms else "0"


def _fmt_factors(pz):
    def fac(r):
        if abs(r.imag) < 1e-12:
            return f"(1 {-r.real:+.4f} q^-1)"
        return f"(1 - ({r.real:.4f}{r.imag:+.4f}j) q^-1)"
    num = f"{pz.gain:.4f}" + (f" q^-{pz.delay}" if pz.delay else "") + "".join(fac(z) for z in pz.zeros)
    den = "".join(fac(p) for p in pz.poles) or "1"
    return f"{num} / {den}"


def _warmup(others, n, cfg):
    if cfg.warmup is not None:
        return min(cfg.warmup, n // 4)
    if not others:
        return 0
    return max(lags_needed(G, cap=n // 4) for G, _ in others)


def identify_miso_minimal(data: Dataset, cfg: PipelineConfig | None = None) -> IdentificationReport:
    """Full pipeline: overall fit, then one SISO re-identification per input.

    Errors are re-raised as :class:`IdentificationError` tagged with the
    pipeline stage.
    """
    cfg = cfg or PipelineConfig()
    try:
        overall = dipca_overall(data, cfg.L, cfg)
    except Exception as exc:
        raise IdentificationError("overall", exc) from exc
    var = overall.variances
    nU = data.n_inputs
    tfs = [overall.model.channel_tf(r) for r in range(nU)]
    passes = 2 if cfg.iterate else 1
    seeds = [[int(cfg.seed), i] for i in range(nU)]
    for _ in range(passes):
        channels, acvfs = [], []
        for i in range(nU):
            stage = f"channel {i + 1}"
            try:
                others = [(tfs[r], float(var[r + 1])) for r in range(nU) if r != i]
                y_i = compute_pseudo_output(data, overall.model, i, channels=tfs)
                noise = ChannelNoise(float(var[0]), others, float(var[i + 1]), cfg.acvf_method)
                w = _warmup(others, data.n_samples, cfg)
                ch = identify_channel(y_i[w:], data.u[i, w:], noise, cfg.L_chan, cfg,
                                      seed=seeds[i])
            except Exception as exc:
                raise IdentificationError(stage, exc) from exc
            channels.append(ch)
            acvfs.append(noise.acvf(cfg.L_chan))
        tfs = [c.tf for c in channels]
    prov = {
        "software": f"misoeiv {__version__}",
        "config": {k: v for k, v in asdict(cfg).items()},
        "data": {k: data.meta[k] for k in sorted(data.meta)},
        "n_samples": data.n_samples,
    }
    return IdentificationReport(overall, var, list(data.labels), channels, acvfs, prov)
