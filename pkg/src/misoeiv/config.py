"""Flat ``key = value`` study configuration.

Example::

    system.channel1.num = 0,1.3
    system.channel1.den = 1,-0.2
    system.channel2.num = "0,0.7"
    system.channel2.den = "1,-0.9"
    N = 5000
    input.std = 3,2
    noise.variance = 2.6868,0.9,0.4
    seed = 1
    n_runs = 100

Blank lines and ``#`` comments are ignored; values may be double-quoted.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .datasim import DEFAULT_BURN_IN, MisoSystem, NoiseSpec
from .lti import TransferFunction
from .pipeline import PipelineConfig

__all__ = ["ConfigError", "StudyConfig", "parse_config", "load_config"]


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key, msg):
        super().__init__(f"config key {key!r}: {msg}")
        self.key = key


_CHANNEL_KEY = re.compile(r"^system\.channel(\d+)\.(num|den)$")

_SCALARS = {
    "N": int,
    "burn_in": int,
    "seed": int,
    "seed_stride": int,
    "n_runs": int,
    "workers": int,
    "L": int,
    "L_chan": int,
    "tol": float,
    "max_iter": int,
    "band": float,
    "gap_cut": float,
    "z": float,
    "bootstrap": int,
    "acvf_method": str,
    "input.kind": str,
    "iterate": "bool",
    "center": "bool",
    "d_override": int,
    "warmup": int,
}
_LISTS = {"input.std", "noise.variance", "noise.snr"}


@dataclass
class StudyConfig:
    system: MisoSystem | None
    N: int = 5000
    burn_in: int = DEFAULT_BURN_IN
    input_kind: str = "gaussian-white"
    input_std: tuple = ()
    noise: NoiseSpec | None = None
    seed: int = 0
    seed_stride: int = 1
    n_runs: int = 100
    workers: int = 1
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    @property
    def n_inputs(self):
        return self.system.n_inputs if self.system is not None else 0

    def run_seed(self, r: int) -> int:
        return self.seed + self.seed_stride * r

    def check_study(self):
        if self.n_runs < 1:
            raise ConfigError("n_runs", "must be >= 1")
        need = 10 * (self.pipeline.L + 1) * (self.n_inputs + 1)
        if self.N <= need:
            raise ConfigError("N", f"must exceed 10*(L+1)*(nU+1) = {need}")

    def to_dict(self):
        return {
            "system": [g.to_dict() for g in self.system.channels] if self.system else None,
            "N": self.N,
            "burn_in": self.burn_in,
            "input_kind": self.input_kind,
            "input_std": list(self.input_std),
            "noise": [dict(e) for e in self.noise.entries] if self.noise else None,
            "seed": self.seed,
            "seed_stride": self.seed_stride,
            "n_runs": self.n_runs,
        }


def _floats(key, text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(key, f"expected comma-separated numbers, got {text!r}") from None


def _scalar(key, kind, text):
    if kind == "bool":
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(key, f"expected a boolean, got {text!r}")
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r} as {kind.__name__}") from None


def parse_config(text: str, require_system: bool = True) -> StudyConfig:
    """Parse config text.

    With ``require_system=False`` the ``system.*`` keys may be omitted (the
    identify command only needs the pipeline settings); ``system`` is then None.
    """
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if len(val) >= 2 and val[0] == val[-1] == '"':
            val = val[1:-1].strip()
        raw[key] = val

    chans = {}
    values = {}
    for key, val in raw.items():
        m = _CHANNEL_KEY.match(key)
        if m:
            chans.setdefault(int(m.group(1)), {})[m.group(2)] = _floats(key, val)
        elif key in _SCALARS:
            values[key] = _scalar(key, _SCALARS[key], val)
        elif key in _LISTS:
            values[key] = _floats(key, val)
        else:
            raise ConfigError(key, "unknown key")

    if not chans and not require_system:
        return _finish(None, values)
    if not chans:
        raise ConfigError("system.channel1.num", "no channels defined")
    if sorted(chans) != list(range(1, len(chans) + 1)):
        raise ConfigError("system.channel", f"channels must be numbered 1..n, got {sorted(chans)}")
    tfs = []
    for i in sorted(chans):
        c = chans[i]
        if "num" not in c:
            raise ConfigError(f"system.channel{i}.num", "missing")
        try:
            tfs.append(TransferFunction.from_coeffs(c["num"], c.get("den", [1.0])))
        except ValueError as exc:
            raise ConfigError(f"system.channel{i}", str(exc)) from None
    return _finish(MisoSystem(tuple(tfs)), values)


def _finish(system, values) -> StudyConfig:
    nU = system.n_inputs if system is not None else 0

    std = values.pop("input.std", [1.0] * nU)
    if system is None:
        for k in ("input.std", "noise.variance", "noise.snr"):
            values.pop(k, None)
        std = []
    elif len(std) == 1:
        std = std * nU
    if system is not None and (len(std) != nU or any(s < 0 for s in std)):
        raise ConfigError("input.std", f"need {nU} non-negative values")
    noise = None
    if "noise.variance" in values and "noise.snr" in values:
        raise ConfigError("noise.snr", "give either noise.variance or noise.snr, not both")
    if "noise.variance" in values:
        v = values.pop("noise.variance")
        if len(v) == 1:
            v = v * (nU + 1)
        if len(v) != nU + 1:
            raise ConfigError("noise.variance", f"need {nU + 1} values (output first)")
        if any(x < 0 for x in v):
            raise ConfigError("noise.variance", "negative variance")
        noise = NoiseSpec.variances(v)
    elif "noise.snr" in values:
        s = values.pop("noise.snr")
        if len(s) == 1:
            s = s * (nU + 1)
        if len(s) != nU + 1 or any(x <= 0 for x in s):
            raise ConfigError("noise.snr", f"need {nU + 1} positive values")
        noise = NoiseSpec(tuple({"snr": x} for x in s))

    kind = values.pop("input.kind", "gaussian-white")
    if kind not in ("gaussian-white", "prbs"):
        raise ConfigError("input.kind", f"unknown input kind {kind!r}")
    pipe_keys = {"L", "L_chan", "tol", "max_iter", "band", "gap_cut", "z", "bootstrap",
                 "acvf_method", "iterate", "center", "d_override", "warmup"}
    pipe = PipelineConfig(**{k: values.pop(k) for k in list(values) if k in pipe_keys})
    if pipe.acvf_method not in ("convolution", "spectral"):
        raise ConfigError("acvf_method", f"unknown method {pipe.acvf_method!r}")
    if pipe.L < 1:
        raise ConfigError("L", "must be >= 1")
    if pipe.L_chan < 1:
        raise ConfigError("L_chan", "must be >= 1")
    cfg = StudyConfig(system=system, input_kind=kind, input_std=tuple(std), noise=noise, pipeline=pipe)
    for k in ("N", "burn_in", "seed", "seed_stride", "n_runs", "workers"):
        if k in values:
            setattr(cfg, k, values.pop(k))
    if cfg.N < 1:
        raise ConfigError("N", "must be >= 1")
    if cfg.burn_in < 0:
        raise ConfigError("burn_in", "must be >= 0")
    if cfg.workers < 1:
        raise ConfigError("workers", "must be >= 1")
    pipe.seed = cfg.seed
    return cfg


def load_config(path, require_system: bool = True) -> StudyConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), require_system)
