"""
Configuration Module

Two layers of configuration for the toolkit.

Environment (loaded from .env via python-dotenv):
    - KAC_OUTPUT_DIR: Directory for CSV/JSON artifacts (default: results)
    - KAC_THREADS: Worker processes for replica ensembles (default: 1)
    - KAC_LOG_LEVEL / KAC_LOG_DIR: Read by the logger module

Experiment (JSON file, see configs/default.json):
    {
      "seed": 1,
      "params": {"mu": 20.0, "rho": 1.0, "lambda": 1.0},
      "initial": {"kind": "product", "eta": 5.0, "law": {"kind": "maxwellian"}},
      "checkpoints": [0.0, 0.5, 1.0, 2.0, 5.0],
      "replicas": 10000,
      "modes": [],
      "truncation": {...}, "spectrum": {...}, "commutators": {...},
      "entropy": {...}, "grid": {...}, "bk": {...}, "chaos": {...}
    }
    "seed" and "params" are required; every other block falls back to the
    defaults below key by key. Unknown keys are rejected and all field
    errors are reported together in one ConfigError.

Step sizes:
    bk.dt defaults to 0.01, not 1e-3. One RK4 step on the default grid
    (401 nodes, 64 angles) costs 4 x 64 interpolations over 401^2 points,
    so a tenfold smaller step makes every solve ten times slower for no
    measurable gain: at dt = 0.01 the lambda = 0 L1 error against the closed
    form is 1.0e-11, the collision mass and energy residuals are below
    1.4e-11 and |rhs(gamma)| is 1.7e-8. Set "bk": {"dt": 0.001} to match
    the finer step exactly.

Sampling:
    entropy.bias_tolerance caps the first-order plug-in bias
    (distinct occupation vectors - 1) / 2R; above it a checkpoint is
    undersampled and the Monte Carlo entropy verdict fails.
"""

import copy
import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Any, Optional

from dotenv import load_dotenv

from src.kac.distributions import InitialCondition, VelocityLaw
from src.kac.model import ModelParams
from src.utils.errors import ConfigError

load_dotenv()

KAC_OUTPUT_DIR = os.getenv("KAC_OUTPUT_DIR", "results")

SEED_LIMIT = 2**64

SECTION_DEFAULTS = {
    "truncation": {"n_max": None, "dt": None},
    "spectrum": {"k_max": 40, "drift_window": 5},
    "commutators": {"modes": [0, 1, 2, 3, 4], "n_cut": 8},
    "entropy": {"cells": 8, "resamples": 200, "miller_madow": False, "bias_tolerance": 0.01},
    "grid": {"v_max": 4.0, "dv": 0.02},
    "bk": {
        "dt": 0.01,
        "n_theta": 64,
        "order": 3,
        "eta_scale": 1.0,
        "law": {"kind": "gaussian", "mean": 0.0, "var": 2.0 / (2.0 * math.pi)},
    },
    "chaos": {
        "mu_list": [32.0, 128.0, 512.0],
        "eta_scale": 1.0,
        "t": 1.0,
        "replicas": 1000,
        "dv": 0.04,
        "pair_dv": 0.2,
        "n_theta": 32,
        "dt": 0.01,
        "resamples": 50,
        "law": {"kind": "gaussian", "mean": 0.0, "var": 2.0 / (2.0 * math.pi)},
    },
}

TOP_LEVEL_DEFAULTS = {
    "initial": {"kind": "stationary"},
    "checkpoints": [0.0, 0.5, 1.0, 2.0, 5.0],
    "replicas": 10000,
    "modes": [],
}

REQUIRED_KEYS = ("seed", "params")
KNOWN_KEYS = set(REQUIRED_KEYS) | set(TOP_LEVEL_DEFAULTS) | set(SECTION_DEFAULTS)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment configuration.

    Attributes:
        seed: Master seed, 0 <= seed < 2^64
        params: Model rates
        initial: Initial-condition description (stationary | product | fixed)
        checkpoints: Strictly increasing observation times
        replicas: Number of simulated trajectories
        modes: Hermite modes recorded as obs_L<n>
        sections: Module blocks (truncation, spectrum, commutators,
            entropy, grid, bk, chaos) with defaults filled in
    """

    seed: int
    params: ModelParams
    initial: dict
    checkpoints: tuple
    replicas: int
    modes: tuple = ()
    sections: dict = field(default_factory=lambda: copy.deepcopy(SECTION_DEFAULTS), compare=False)

    def section(self, name: str) -> dict:
        return self.sections[name]

    def initial_condition(self) -> InitialCondition:
        return InitialCondition.from_dict(self.initial, self.params)

    def with_seed(self, seed: Optional[int]) -> "ExperimentConfig":
        if seed is None:
            return self
        if not 0 <= seed < SEED_LIMIT:
            raise ConfigError([f"seed: must lie in [0, 2^64), got {seed}"], "--seed")
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        data = {
            "seed": self.seed,
            "params": {"mu": self.params.mu, "rho": self.params.rho, "lambda": self.params.lam},
            "initial": self.initial,
            "checkpoints": list(self.checkpoints),
            "replicas": self.replicas,
            "modes": list(self.modes),
        }
        data.update(copy.deepcopy(self.sections))
        return data


def env_threads(raw: Optional[str] = None) -> int:
    """Worker count from KAC_THREADS.

    Raises:
        ConfigError: If the value is not an integer >= 1
    """
    raw = os.getenv("KAC_THREADS", "1") if raw is None else raw
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigError([f"KAC_THREADS: must be an integer >= 1, got {raw!r}"], "environment")
    if threads < 1:
        raise ConfigError([f"KAC_THREADS: must be an integer >= 1, got {threads}"], "environment")
    return threads


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _validate_params(raw: Any, errors: list) -> Optional[ModelParams]:
    if not isinstance(raw, dict):
        errors.append("params: must be an object with mu, rho, lambda")
        return None
    unknown = set(raw) - {"mu", "rho", "lambda"}
    if unknown:
        errors.append(f"params: unknown keys {sorted(unknown)}")
    values = {}
    for key in ("mu", "rho", "lambda"):
        if key not in raw:
            errors.append(f"params.{key}: required")
        elif not _is_number(raw[key]):
            errors.append(f"params.{key}: must be a finite number, got {raw[key]!r}")
        else:
            values[key] = float(raw[key])
    if len(values) < 3:
        return None
    try:
        return ModelParams(mu=values["mu"], rho=values["rho"], lam=values["lambda"])
    except ValueError as e:
        errors.append(f"params: {e}")
        return None


def _validate_law(raw: Any, where: str, errors: list):
    if raw is None:
        return
    if not isinstance(raw, dict):
        errors.append(f"{where}: must be an object")
        return
    try:
        VelocityLaw.from_dict(raw)
    except (ValueError, TypeError) as e:
        errors.append(f"{where}: {e}")


def _validate_initial(raw: Any, errors: list):
    if not isinstance(raw, dict):
        errors.append("initial: must be an object")
        return
    kind = raw.get("kind", "stationary")
    allowed = {"stationary": {"kind"}, "product": {"kind", "eta", "law"}, "fixed": {"kind", "n", "law"}}
    if kind not in allowed:
        errors.append(f"initial.kind: must be one of {sorted(allowed)}, got {kind!r}")
        return
    unknown = set(raw) - allowed[kind]
    if unknown:
        errors.append(f"initial: unknown keys {sorted(unknown)} for kind {kind!r}")
    if kind == "product" and not (_is_number(raw.get("eta")) and raw["eta"] >= 0):
        errors.append("initial.eta: must be a number >= 0")
    if kind == "fixed" and not (_is_int(raw.get("n")) and raw["n"] >= 0):
        errors.append("initial.n: must be an integer >= 0")
    _validate_law(raw.get("law"), "initial.law", errors)


def _validate_checkpoints(raw: Any, errors: list):
    if not isinstance(raw, list) or not raw:
        errors.append("checkpoints: must be a non-empty list")
        return
    if not all(_is_number(t) for t in raw):
        errors.append("checkpoints: all entries must be finite numbers")
        return
    if raw[0] < 0 or any(b <= a for a, b in zip(raw, raw[1:])):
        errors.append("checkpoints: must be >= 0 and strictly increasing")


def _positive(section: str, key: str, value: Any, errors: list, integer: bool = False):
    ok = _is_int(value) if integer else _is_number(value)
    if not ok or value <= 0:
        kind = "integer" if integer else "number"
        errors.append(f"{section}.{key}: must be a positive {kind}, got {value!r}")


def _validate_sections(sections: dict, errors: list):
    for key in ("k_max", "drift_window"):
        _positive("spectrum", key, sections["spectrum"][key], errors, integer=True)
    commutators = sections["commutators"]
    _positive("commutators", "n_cut", commutators["n_cut"], errors, integer=True)
    if not isinstance(commutators["modes"], list) or not commutators["modes"] or not all(
        _is_int(m) and m >= 0 for m in commutators["modes"]
    ):
        errors.append("commutators.modes: must be a non-empty list of integers >= 0")
    entropy = sections["entropy"]
    _positive("entropy", "cells", entropy["cells"], errors, integer=True)
    _positive("entropy", "resamples", entropy["resamples"], errors, integer=True)
    _positive("entropy", "bias_tolerance", entropy["bias_tolerance"], errors)
    if not isinstance(entropy["miller_madow"], bool):
        errors.append(f"entropy.miller_madow: must be true or false, got {entropy['miller_madow']!r}")
    for key in ("v_max", "dv"):
        _positive("grid", key, sections["grid"][key], errors)
    truncation = sections["truncation"]
    if truncation["n_max"] is not None:
        _positive("truncation", "n_max", truncation["n_max"], errors, integer=True)
    if truncation["dt"] is not None:
        _positive("truncation", "dt", truncation["dt"], errors)
    bk = sections["bk"]
    for key in ("dt", "eta_scale"):
        _positive("bk", key, bk[key], errors)
    _positive("bk", "n_theta", bk["n_theta"], errors, integer=True)
    if bk["order"] not in (1, 3):
        errors.append(f"bk.order: must be 1 or 3, got {bk['order']!r}")
    _validate_law(bk["law"], "bk.law", errors)
    chaos = sections["chaos"]
    for key in ("eta_scale", "t", "dv", "pair_dv", "dt"):
        _positive("chaos", key, chaos[key], errors)
    for key in ("replicas", "n_theta", "resamples"):
        _positive("chaos", key, chaos[key], errors, integer=True)
    mu_list = chaos["mu_list"]
    if not isinstance(mu_list, list) or not mu_list or not all(_is_number(m) and m > 0 for m in mu_list):
        errors.append("chaos.mu_list: must be a non-empty list of positive numbers")
    elif any(b <= a for a, b in zip(mu_list, mu_list[1:])):
        errors.append("chaos.mu_list: must be strictly increasing")
    _validate_law(chaos["law"], "chaos.law", errors)


def parse_config(raw: Any, source: str = "<config>") -> ExperimentConfig:
    """Validate a decoded JSON document.

    Raises:
        ConfigError: With one message per invalid field
    """
    if not isinstance(raw, dict):
        raise ConfigError(["top level: must be a JSON object"], source)
    errors = []
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        errors.append(f"unknown keys {sorted(unknown)}")
    for key in REQUIRED_KEYS:
        if key not in raw:
            errors.append(f"{key}: required")

    seed = raw.get("seed")
    if "seed" in raw and not (_is_int(seed) and 0 <= seed < SEED_LIMIT):
        errors.append(f"seed: must be an integer in [0, 2^64), got {seed!r}")
    params = _validate_params(raw["params"], errors) if "params" in raw else None

    merged = {key: copy.deepcopy(raw.get(key, default)) for key, default in TOP_LEVEL_DEFAULTS.items()}
    _validate_initial(merged["initial"], errors)
    _validate_checkpoints(merged["checkpoints"], errors)
    if not (_is_int(merged["replicas"]) and merged["replicas"] >= 1):
        errors.append(f"replicas: must be an integer >= 1, got {merged['replicas']!r}")
    if not isinstance(merged["modes"], list) or not all(_is_int(m) and m >= 0 for m in merged["modes"]):
        errors.append("modes: must be a list of integers >= 0")

    sections = {}
    for name, defaults in SECTION_DEFAULTS.items():
        block = raw.get(name, {})
        if not isinstance(block, dict):
            errors.append(f"{name}: must be an object")
            block = {}
        extra = set(block) - set(defaults)
        if extra:
            errors.append(f"{name}: unknown keys {sorted(extra)}")
        sections[name] = {key: copy.deepcopy(block.get(key, value)) for key, value in defaults.items()}
    if not errors:
        _validate_sections(sections, errors)

    if errors:
        raise ConfigError(errors, source)
    return ExperimentConfig(
        seed=int(seed),
        params=params,
        initial=merged["initial"],
        checkpoints=tuple(float(t) for t in merged["checkpoints"]),
        replicas=int(merged["replicas"]),
        modes=tuple(int(m) for m in merged["modes"]),
        sections=sections,
    )


def load_config(path: str) -> ExperimentConfig:
    """Read and validate a JSON experiment config.

    Raises:
        ConfigError: If the file is missing, is not JSON, or fails validation
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except FileNotFoundError:
        raise ConfigError([f"file not found: {path}"], path)
    except json.JSONDecodeError as e:
        raise ConfigError([f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}"], path)
    return parse_config(raw, path)


def default_config(seed: int = 1) -> ExperimentConfig:
    """Built-in defaults (mirrored by configs/default.json)."""
    return parse_config({"seed": seed, "params": {"mu": 20.0, "rho": 1.0, "lambda": 1.0}}, "<defaults>")


def config_hash(config: ExperimentConfig) -> str:
    """First 16 hex digits of the SHA-256 of the canonical JSON form."""
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
