"""Simulation of noise-free MISO data and errors-in-variables corruption."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .lti import TransferFunction, filter

__all__ = [
    "MisoSystem",
    "Dataset",
    "NoiseSpec",
    "generate_input",
    "generate_inputs",
    "simulate_miso",
    "corrupt",
    "benchmark_miso_system",
    "benchmark_siso_system",
    "write_csv",
    "read_csv",
]

DEFAULT_BURN_IN = 200


@dataclass(frozen=True)
class MisoSystem:
    channels: tuple

    def __post_init__(self):
        chans = tuple(self.channels)
        if len(chans) < 1:
            raise ValueError("a MISO system needs at least one channel")
        for g in chans:
            if not isinstance(g, TransferFunction):
                raise TypeError("channels must be TransferFunction instances")
        object.__setattr__(self, "channels", chans)

    @property
    def n_inputs(self) -> int:
        return len(self.channels)


@dataclass(eq=False)
class Dataset:
    """Aligned output/input records.

    Attributes
    ----------
    y : ndarray, shape (N,)
    u : ndarray, shape (nU, N)
    labels : list of str
        Variable names, output first.
    meta : dict
        Free-form provenance (seeds, variances, clean flag).
    """

    y: np.ndarray
    u: np.ndarray
    labels: list = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        u = np.asarray(self.u, dtype=float)
        if u.ndim == 1:
            u = u[None, :]
        self.u = u
        if self.y.size < 1:
            raise ValueError("dataset must hold at least one sample")
        if u.shape[1] != self.y.size:
            raise ValueError(
                f"length mismatch: y has {self.y.size} samples, u has {u.shape[1]}"
            )
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(u))):
            raise ValueError("dataset contains non-finite values")
        if self.labels is None:
            self.labels = ["y"] + [f"u{i + 1}" for i in range(u.shape[0])]
        if len(self.labels) != 1 + u.shape[0]:
            raise ValueError("one label per variable expected")

    @property
    def n_samples(self) -> int:
        return self.y.size

    @property
    def n_inputs(self) -> int:
        return self.u.shape[0]

    def variables(self) -> np.ndarray:
        """All variables as rows, output first."""
        return np.vstack([self.y[None, :], self.u])

    def slice(self, start: int = 0, stop: int | None = None) -> "Dataset":
        return Dataset(self.y[start:stop], self.u[:, start:stop], list(self.labels), dict(self.meta))


@dataclass(frozen=True)
class NoiseSpec:
    """Per-variable error specification, output first.

    Each entry is a mapping with exactly one of ``variance`` or ``snr``.
    """

    entries: tuple

    def __post_init__(self):
        ents = tuple(dict(e) for e in self.entries)
        for i, e in enumerate(ents):
            keys = set(e) & {"variance", "snr"}
            if len(keys) != 1:
                raise ValueError(f"noise entry {i}: give exactly one of variance/snr")
            if "variance" in e and e["variance"] < 0:
                raise ValueError(f"noise entry {i}: negative variance {e['variance']}")
            if "snr" in e and not e["snr"] > 0:
                raise ValueError(f"noise entry {i}: snr must be positive")
        object.__setattr__(self, "entries", ents)

    @classmethod
    def variances(cls, values):
        return cls(tuple({"variance": float(v)} for v in values))

    @classmethod
    def snr(cls, value, n_vars):
        return cls(tuple({"snr": float(value)} for _ in range(n_vars)))


def _child_seeds(seed, n):
    # independent streams per channel: SeedSequence(seed).spawn(n)
    return np.random.SeedSequence(seed).spawn(n)


def generate_input(kind: str, N: int, seed) -> np.ndarray:
    """Excitation signal.

    ``gaussian-white`` is zero-mean unit-variance Gaussian noise; ``prbs`` is a
    random binary +/-1 sequence (independent fair coin flips per sample).
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = np.random.default_rng(seed)
    if kind == "gaussian-white":
        return rng.standard_normal(N)
    if kind == "prbs":
        return np.where(rng.integers(0, 2, size=N) == 1, 1.0, -1.0)
    raise ValueError(f"unknown input kind {kind!r}")


def generate_inputs(n_inputs, N, seed, kind="gaussian-white", std=None):
    """One independent excitation per channel, scaled by ``std``.

    Channel i draws from the i-th child of ``SeedSequence(seed)``.
    """
    std = np.ones(n_inputs) if std is None else np.broadcast_to(np.asarray(std, float), (n_inputs,))
    seeds = _child_seeds(seed, n_inputs)
    return [s * generate_input(kind, N, ss) for s, ss in zip(std, seeds)]


def simulate_miso(sys: MisoSystem, inputs, burn_in: int = DEFAULT_BURN_IN) -> Dataset:
    """Noise-free output ``y* = sum_i G_i u_i*``; the first ``burn_in`` samples are dropped."""
    inputs = [np.asarray(u, dtype=float) for u in inputs]
    if len(inputs) != sys.n_inputs:
        raise ValueError(f"expected {sys.n_inputs} input sequences, got {len(inputs)}")
    n = {u.size for u in inputs}
    if len(n) != 1:
        raise ValueError("input sequences differ in length")
    (n,) = n
    if n <= burn_in:
        raise ValueError(f"input length {n} does not exceed burn_in={burn_in}")
    y = np.zeros(n)
    for g, u in zip(sys.channels, inputs):
        y += filter(g, u)
    u = np.vstack(inputs)
    return Dataset(y[burn_in:], u[:, burn_in:], meta={"clean": True, "burn_in": burn_in})


def corrupt(clean: Dataset, spec: NoiseSpec, seed):
    """Add independent white Gaussian errors to every variable.

    Returns
    -------
    noisy : Dataset
    variances : ndarray
        Error variances used, output first.  SNR entries are resolved as
        ``var(clean signal) / snr`` with the sample variance of the clean record.
    """
    X = clean.variables()
    if len(spec.entries) != X.shape[0]:
        raise ValueError(f"noise spec has {len(spec.entries)} entries for {X.shape[0]} variables")
    variances = np.empty(X.shape[0])
    for i, e in enumerate(spec.entries):
        variances[i] = e["variance"] if "variance" in e else np.var(X[i]) / e["snr"]
    streams = _child_seeds(seed, X.shape[0])
    Z = X.copy()
    for i, ss in enumerate(streams):
        if variances[i] > 0:
            Z[i] += np.sqrt(variances[i]) * np.random.default_rng(ss).standard_normal(X.shape[1])
    meta = dict(clean.meta)
    meta.update(clean=False, noise_seed=seed, noise_variances=variances.tolist())
    return Dataset(Z[0], Z[1:], list(clean.labels), meta), variances


def benchmark_miso_system() -> MisoSystem:
    """G1 = 1.3q^-1/(1-0.2q^-1), G2 = 0.7q^-1/(1-0.9q^-1)."""
    return MisoSystem((
        TransferFunction.from_coeffs([0.0, 1.3], [1.0, -0.2]),
        TransferFunction.from_coeffs([0.0, 0.7], [1.0, -0.9]),
    ))


def benchmark_siso_system() -> MisoSystem:
    """(1 + 0.4q^-1 + 0.6q^-2) y = 1.2 q^-1 u."""
    return MisoSystem((TransferFunction.from_coeffs([0.0, 1.2], [1.0, 0.4, 0.6]),))


def write_csv(data: Dataset, path, meta_path=None):
    """Write ``y,u1,...`` columns with 17 significant digits and LF endings."""
    cols = data.variables().T
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(data.labels) + "\n")
        for row in cols:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")
    if meta_path is not None:
        with open(meta_path, "w", encoding="utf-8") as fh:
            json.dump(data.meta, fh, indent=2, sort_keys=True)
            fh.write("\n")


class CSVFormatError(ValueError):
    pass


def read_csv(path) -> Dataset:
    """Parse a dataset CSV; the first column is the output."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CSVFormatError("empty file")
    labels = [s.strip() for s in lines[0].split(",")]
    if len(labels) < 2:
        raise CSVFormatError("need at least two columns (output and one input)")
    rows = []
    for r, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(labels):
            raise CSVFormatError(f"row {r}: expected {len(labels)} columns, got {len(cells)}")
        vals = []
        for c, cell in enumerate(cells):
            try:
                v = float(cell)
            except ValueError:
                raise CSVFormatError(
                    f"row {r}, column {c + 1} ({labels[c]}): non-numeric value {cell.strip()!r}"
                ) from None
            if not np.isfinite(v):
                raise CSVFormatError(f"row {r}, column {c + 1} ({labels[c]}): non-finite value")
            vals.append(v)
        rows.append(vals)
    if not rows:
        raise CSVFormatError("no data rows")
    arr = np.array(rows)
    return Dataset(arr[:, 0], arr[:, 1:].T, labels)


def with_meta(data: Dataset, **kw) -> Dataset:
    return replace(data, meta={**data.meta, **kw})
