"""Flat key=value experiment configuration.

One line per setting, ``key = value``, with ``#`` comments and blank
lines ignored.  Every key has a typed default; unknown keys are
rejected outright so a typo cannot silently fall back.  The canonical
serialization of the parsed values feeds a short sha256 digest that is
stamped on every CSV row a run emits, tying artifacts to their exact
configuration.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

# kind tags: f float, i int, s string, f* float list, i* int list, s* string list
_SCHEMA: dict[str, tuple[str, object]] = {
    "side": ("f", 1.0),
    "origin": ("f*", (0.0, 0.0, 0.0)),
    "eps": ("f", 0.125),
    "eps_list": ("f*", (0.125, 0.0625, 0.03125)),
    "k1": ("f", 1.0),
    "k2": ("f", 1.0),
    "k3": ("f", 1.0),
    "modulus": ("i", 2),
    "profile": ("s", "const:1"),
    "recipe_a": ("s", "bubble:0.05:0"),
    "recipe_b": ("s", "zero"),
    "t_end": ("f", 0.5),
    "samples": ("i", 40),
    "dt": ("f", 0.0),  # 0 = pick from the stability bound
    "safety": ("f", 0.5),
    "lam": ("f", 2.0),
    "meso_h": ("f", 0.25),
    "ratios": ("i*", (8, 16)),
    "gammas": ("f*", (1.0,)),
    "grid_cells": ("i", 16),
    "ref_cells": ("i", 32),
    "diag_cells": ("i", 8),
    "korn_eps": ("f*", (0.25, 0.125, 0.0625)),
    "korn_floor": ("f", 0.05),
    "kernel_tests": ("s*", ("one", "x1", "y3", "x1y1", "gauss")),
    "density_tests": ("s*", ("one", "x1", "sinprod")),
    "lemma_h": ("f*", (0.25, 0.125, 0.0625)),
    "lemma_ratio": ("i", 8),
}


def _parse_scalar(kind: str, key: str, text: str):
    try:
        if kind == "f":
            return float(text)
        if kind == "i":
            return int(text)
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key}: {text!r}") from exc
    return text


def _parse_value(kind: str, key: str, text: str):
    if kind.endswith("*"):
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise ConfigurationError(f"{key} must not be empty")
        return tuple(_parse_scalar(kind[0], key, p) for p in parts)
    return _parse_scalar(kind, key, text)


def _format_value(kind: str, value) -> str:
    if kind.endswith("*"):
        return ",".join(_format_value(kind[0], v) for v in value)
    if kind == "f":
        return repr(float(value))
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed settings plus their canonical text form."""

    values: dict = field(repr=False)

    def __getattr__(self, name):
        try:
            return self.values[name]
        except KeyError:
            raise AttributeError(name) from None

    def canonical(self) -> str:
        lines = [
            f"{key}={_format_value(_SCHEMA[key][0], self.values[key])}"
            for key in sorted(self.values)
        ]
        return "\n".join(lines) + "\n"

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]


def _validate(values: dict) -> None:
    if values["side"] <= 0:
        raise ConfigurationError("side must be positive")
    if len(values["origin"]) != 3:
        raise ConfigurationError("origin needs exactly three coordinates")
    eps_list = values["eps_list"]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigurationError("eps_list must be strictly decreasing")
    if min(eps_list) <= 0 or values["eps"] <= 0:
        raise ConfigurationError("spacings must be positive")
    if values["samples"] < 1:
        raise ConfigurationError("samples must be at least 1")
    if not 0.0 < values["safety"] <= 1.0:
        raise ConfigurationError("safety must lie in (0, 1]")
    for g in values["gammas"]:
        if not 0.0 < g < 2.0:
            raise ConfigurationError(f"gamma {g} outside (0, 2)")
    for r in values["ratios"]:
        if r < 4:
            raise ConfigurationError("ratios must be at least 4")
    if values["t_end"] <= 0:
        raise ConfigurationError("t_end must be positive")
    from .kernels import DENSITY_TESTS, PAIR_TESTS

    for name in values["kernel_tests"]:
        if name not in PAIR_TESTS:
            raise ConfigurationError(f"unknown kernel test function {name!r}")
    for name in values["density_tests"]:
        if name not in DENSITY_TESTS:
            raise ConfigurationError(f"unknown density test function {name!r}")


def parse_config(text: str) -> ExperimentConfig:
    values = {key: default for key, (_, default) in _SCHEMA.items()}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _SCHEMA:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(_SCHEMA[key][0], key, value.strip())
    _validate(values)
    return ExperimentConfig(values)


def load_config(path=None) -> ExperimentConfig:
    """Read a config file; with no path, return pure defaults."""
    if path is None:
        return parse_config("")
    return parse_config(Path(path).read_text())


def parse_recipe(text: str, box):
    """Initial-data recipe: a smooth field sampled at points.

    ``zero`` is the null field; ``bubble:AMP:AXIS`` is a product of
    squared sine arches scaled to the box, vanishing on the boundary,
    directed along one coordinate axis.
    """
    parts = text.split(":")
    if parts[0] == "zero" and len(parts) == 1:
        return lambda pts: np.zeros_like(np.atleast_2d(pts))
    if parts[0] == "bubble" and len(parts) == 3:
        try:
            amp = float(parts[1])
            axis = int(parts[2])
        except ValueError as exc:
            raise ConfigurationError(f"bad bubble recipe {text!r}") from exc
        if axis not in (0, 1, 2):
            raise ConfigurationError(f"bubble axis must be 0, 1 or 2, got {axis}")
        lo, side = box.lo, box.side

        def bubble(pts):
            pts = np.atleast_2d(np.asarray(pts, dtype=float))
            arch = np.sin(np.pi * (pts - lo) / side) ** 2
            out = np.zeros_like(pts)
            out[:, axis] = amp * np.prod(arch, axis=1)
            return out

        return bubble
    raise ConfigurationError(f"unknown initial-data recipe {text!r}")
