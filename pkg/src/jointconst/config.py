"""Scenario configuration files (YAML key-value documents).

Example::

    T: 2
    K: 2
    sizes: [2, 2]
    channels:            # per user, T rows of [re, im] (or T x R of [re, im])
      - [[1.0, 0.0], [0.0, 0.0]]
      - [[0.7071067811865476, 0.0], [0.7071067811865476, 0.0]]
    snr: [6.0, 8.0]      # or {mean: 10.0, jitter_std: 1.0}
    P_m: 1.0
    P_c: 4.0
    eta: 0.1
    n_samples: 10000
    iterations: 100
    n_eval: 100000
    restarts: 5
    seed: 0
    convention: real
    real_points: true

``channels: random`` requests fresh normalized draws instead of explicit
matrices. Omitted keys fall back to the defaults listed in README.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .experiments import KNOWN_ENCODERS, ScenarioSpec, SnrJitter
from .model import PowerConstraint
from .optimizer import OptimizationConfig, PlateauRule


class ParseError(ValueError):
    """Raised for files that are not well-formed configuration documents."""


class ValidationError(ValueError):
    """Raised for well-formed documents with inconsistent or invalid fields."""


_DEFAULTS = {
    "R": 1,
    "P_m": 1.0,
    "P_c": 4.0,
    "eta": 0.1,
    "n_samples": 10_000,
    "iterations": 100,
    "n_eval": 100_000,
    "restarts": 1,
    "seed": 0,
    "convention": "real",
    "real_points": False,
    "encoders": list(KNOWN_ENCODERS),
}

_KNOWN_KEYS = set(_DEFAULTS) | {
    "T",
    "K",
    "sizes",
    "channels",
    "snr",
    "plateau_patience",
    "plateau_min_improvement",
}


def _require(doc: dict, key: str):
    if key not in doc:
        raise ValidationError(f"missing required field: {key}")
    return doc[key]


def _positive_int(doc: dict, key: str) -> int:
    value = doc[key]
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ValidationError(f"field {key} must be a positive integer, got {value!r}")
    return value


def _positive_float(doc: dict, key: str) -> float:
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
        raise ValidationError(f"field {key} must be a positive number, got {value!r}")
    return float(value)


def _parse_channel_matrix(entry, T: int, R: int, user: int) -> np.ndarray:
    arr = np.asarray(entry, dtype=np.float64)
    if arr.shape == (T, 2) and R == 1:
        arr = arr[:, None, :]
    if arr.shape != (T, R, 2):
        raise ValidationError(
            f"field channels[{user}] must be a {T}x{R} matrix of [re, im] "
            f"pairs, got shape {arr.shape}"
        )
    return arr[..., 0] + 1j * arr[..., 1]


def _parse_snr(doc: dict, K: int):
    snr = _require(doc, "snr")
    if isinstance(snr, dict):
        extra = set(snr) - {"mean", "jitter_std"}
        if extra or "mean" not in snr:
            raise ValidationError(
                "field snr must be a per-user list or {mean, jitter_std}"
            )
        return SnrJitter(
            mean=float(snr["mean"]), jitter_std=float(snr.get("jitter_std", 1.0))
        )
    if isinstance(snr, list):
        if len(snr) != K:
            raise ValidationError(f"field snr must list {K} per-user values")
        values = []
        for v in snr:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
                raise ValidationError(f"field snr contains a non-finite value: {v!r}")
            values.append(float(v))
        return tuple(values)
    raise ValidationError("field snr must be a list or a {mean, jitter_std} mapping")


def spec_from_dict(doc: dict) -> ScenarioSpec:
    if not isinstance(doc, dict):
        raise ValidationError("configuration root must be a mapping")
    unknown = set(doc) - _KNOWN_KEYS
    if unknown:
        raise ValidationError(f"unknown fields: {sorted(unknown)}")
    doc = {**_DEFAULTS, **doc}

    _require(doc, "T")
    _require(doc, "K")
    T = _positive_int(doc, "T")
    K = _positive_int(doc, "K")
    R = _positive_int(doc, "R")
    sizes = doc.get("sizes", [2] * K)
    if not isinstance(sizes, list) or len(sizes) != K:
        raise ValidationError(f"field sizes must list {K} alphabet sizes")
    if any(not isinstance(s, int) or s < 2 for s in sizes):
        raise ValidationError("field sizes entries must be integers >= 2")

    channels_doc = _require(doc, "channels")
    if channels_doc == "random":
        channels = None
    elif isinstance(channels_doc, list):
        if len(channels_doc) != K:
            raise ValidationError(f"field channels must list {K} matrices")
        raw = [
            _parse_channel_matrix(entry, T, R, user)
            for user, entry in enumerate(channels_doc)
        ]
        channels = np.stack(raw)
        norms = np.sum(np.abs(channels) ** 2, axis=(1, 2))
        if np.any(norms == 0):
            raise ValidationError("field channels contains an all-zero matrix")
        channels /= np.sqrt(norms)[:, None, None]
    else:
        raise ValidationError('field channels must be "random" or a list of matrices')

    convention = doc["convention"]
    if convention not in ("real", "circular"):
        raise ValidationError(f"field convention must be real or circular, got {convention!r}")
    encoders = doc["encoders"]
    if not isinstance(encoders, list) or not encoders:
        raise ValidationError("field encoders must be a nonempty list")
    bad = set(encoders) - set(KNOWN_ENCODERS)
    if bad:
        raise ValidationError(f"field encoders has unknown entries: {sorted(bad)}")

    convergence = None
    if "plateau_patience" in doc or "plateau_min_improvement" in doc:
        convergence = PlateauRule(
            patience=int(doc.get("plateau_patience", 20)),
            min_improvement=float(doc.get("plateau_min_improvement", 1e-4)),
        )

    mean_power = _positive_float(doc, "P_m")
    peak_power = _positive_float(doc, "P_c")
    if peak_power < mean_power:
        raise ValidationError("field P_c must be >= P_m")
    pc = PowerConstraint(mean_power=mean_power, peak_antenna_power=peak_power)
    opt = OptimizationConfig(
        eta=_positive_float(doc, "eta"),
        n_samples=_positive_int(doc, "n_samples"),
        max_iterations=_positive_int(doc, "iterations"),
        convergence=convergence,
        restarts=_positive_int(doc, "restarts"),
        seed=int(doc["seed"]),
        n_eval=_positive_int(doc, "n_eval"),
        real_points=bool(doc["real_points"]),
    )
    try:
        return ScenarioSpec(
            T=T,
            K=K,
            R=R,
            sizes=tuple(sizes),
            channels=channels,
            snr=_parse_snr(doc, K),
            pc=pc,
            opt=opt,
            encoders=tuple(encoders),
            n_eval=_positive_int(doc, "n_eval"),
            convention=convention,
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def load_config(path) -> ScenarioSpec:
    """Parse and validate a scenario configuration file."""
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed configuration: {exc}") from exc
    return spec_from_dict(doc)


def spec_to_dict(spec: ScenarioSpec) -> dict:
    """Configuration document equivalent to ``spec`` (round-trips fields)."""
    if spec.channels is None:
        channels = "random"
    else:
        channels = [
            [[[float(c.real), float(c.imag)] for c in row] for row in matrix]
            for matrix in spec.channels
        ]
    if isinstance(spec.snr, SnrJitter):
        snr = {"mean": spec.snr.mean, "jitter_std": spec.snr.jitter_std}
    else:
        snr = [float(s) for s in spec.snr]
    doc = {
        "T": spec.T,
        "K": spec.K,
        "R": spec.R,
        "sizes": list(spec.sizes),
        "channels": channels,
        "snr": snr,
        "P_m": spec.pc.mean_power,
        "P_c": spec.pc.peak_antenna_power,
        "eta": spec.opt.eta,
        "n_samples": spec.opt.n_samples,
        "iterations": spec.opt.max_iterations,
        "n_eval": spec.n_eval,
        "restarts": spec.opt.restarts,
        "seed": spec.opt.seed,
        "convention": spec.convention,
        "real_points": spec.opt.real_points,
        "encoders": list(spec.encoders),
    }
    if spec.opt.convergence is not None:
        doc["plateau_patience"] = spec.opt.convergence.patience
        doc["plateau_min_improvement"] = spec.opt.convergence.min_improvement
    return doc


def dump_config(spec: ScenarioSpec, path) -> None:
    Path(path).write_text(yaml.safe_dump(spec_to_dict(spec), sort_keys=False))
