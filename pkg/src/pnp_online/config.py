"""Flat key=value experiment configuration with command-line overrides.

The file format is deliberately diff-friendly: one `key = value` per line,
'#' comments. Unknown keys are rejected so typos fail loudly at parse time.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass

from pnp_online.errors import ConfigurationError

ALGORITHMS = ("ista", "admm", "pnp-ista", "pnp-admm", "pnp-sgd")
DENOISERS = ("tv", "filter", "identity")


@dataclass
class ExperimentConfig:
    # forward model
    model: str = "dt"                  # "dt" or "gaussian"
    grid: int = 32
    domain_side: float = 0.18
    wavelength: float = 0.0084
    eps_background: float = 1.0
    transmitters: int = 16
    receivers: int = 48
    ring_radius: float = 1.6
    incident: str = "point"
    input_snr_db: float = 40.0
    # phantom
    phantom: str = "blobs"             # "blobs", "checker", or a .pgm path
    f_max: float = 0.05                # contrast scale for [0,1] phantoms
    # reconstruction
    algorithm: str = "pnp-sgd"
    denoiser: str = "tv"
    lam: float = 5e-9                  # regularization weight lambda
    sigma: float | None = None         # denoiser strength; sqrt(gamma*lam) if unset
    gamma: float | None = None         # absolute step; overrides gamma_scale
    gamma_scale: float = 1.0           # gamma = gamma_scale / L
    accelerated: bool = False
    iterations: int = 500
    batch_size: int = 4
    sample_mode: str = "replacement"
    seed: int = 0
    dist_stride: int | None = None
    record_timing: bool = True
    # sweeps (scales of 1/L, and minibatch sizes)
    sweep_gammas: str = "1,0.25,0.0625"
    sweep_batches: str = "2,4,8"
    # batch-vs-online comparison
    budget: int = 4
    # counter-example demo
    ce_gamma: float = 0.5
    ce_sigma: float = 1.0
    ce_c: float = 1.0
    ce_z0: float = 0.1
    ce_iters: int = 10000
    # certificates
    cert_alpha: float = 0.5
    cert_pairs: int = 1000
    cert_domain_scale: float = 2.0
    cert_tol: float = 1e-9
    cert_seed: int = 0
    # output
    outdir: str = "out"

    def validate(self):
        if self.model not in ("dt", "gaussian"):
            raise ConfigurationError(f"unknown model {self.model!r}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}")
        if self.denoiser not in DENOISERS:
            raise ConfigurationError(f"unknown denoiser {self.denoiser!r}")
        if self.phantom not in ("blobs", "checker"):
            if not self.phantom.endswith(".pgm"):
                raise ConfigurationError(
                    f"phantom must be 'blobs', 'checker', or a .pgm path, "
                    f"got {self.phantom!r}")
            if not os.path.exists(self.phantom):
                raise ConfigurationError(f"phantom file {self.phantom!r} not found")
        if not self.gamma_list():
            raise ConfigurationError("sweep_gammas must be nonempty")
        if not self.batch_list():
            raise ConfigurationError("sweep_batches must be nonempty")
        if self.iterations < 0 or self.batch_size < 1 or self.budget < 1:
            raise ConfigurationError("iteration/batch/budget values out of range")
        return self

    def gamma_list(self):
        try:
            return [float(v) for v in self.sweep_gammas.split(",") if v.strip()]
        except ValueError:
            raise ConfigurationError(
                f"bad sweep_gammas {self.sweep_gammas!r}") from None

    def batch_list(self):
        try:
            return [int(v) for v in self.sweep_batches.split(",") if v.strip()]
        except ValueError:
            raise ConfigurationError(
                f"bad sweep_batches {self.sweep_batches!r}") from None


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(name, raw):
    if name not in _FIELDS:
        raise ConfigurationError(f"unknown config key {name!r}")
    target = _FIELDS[name].type
    raw = raw.strip()
    if target == "bool":
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigurationError(f"bad boolean for {name}: {raw!r}")
    if target == "int":
        return int(raw)
    if target == "float":
        return math.inf if raw.lower() in ("inf", "+inf") else float(raw)
    if target in ("float | None", "int | None"):
        if raw.lower() in ("none", ""):
            return None
        return float(raw) if target.startswith("float") else int(raw)
    return raw


def parse_overrides(pairs):
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigurationError(f"override {pair!r} is not key=value")
        key, _, value = pair.partition("=")
        out[key.strip()] = _coerce(key.strip(), value)
    return out


def load_config(path=None, overrides=None):
    """Build an ExperimentConfig from an optional file plus overrides."""
    values = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigurationError(f"config file {path!r} not found")
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigurationError(
                        f"{path}:{lineno}: expected key = value")
                key, _, value = line.partition("=")
                values[key.strip()] = _coerce(key.strip(), value)
    values.update(parse_overrides(overrides))
    seed_env = os.environ.get("PNP_SEED")
    if seed_env is not None:
        values["seed"] = int(seed_env)
    return ExperimentConfig(**values).validate()


def dump_config(config):
    """Render the config back to the flat key=value format."""
    lines = []
    for f in dataclasses.fields(ExperimentConfig):
        lines.append(f"{f.name} = {getattr(config, f.name)}")
    return "\n".join(lines) + "\n"
