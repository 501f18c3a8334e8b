"""Run configuration read from an INI file.

Example::

    [run]
    engine = exact
    output = results

    [model]
    n_spins = 100
    g_over_f = 0.5
    f = 1
    gamma = 1
    pump_w = optimal

    [scan]
    n_spins = 10, 30, 50, 100
    g_over_f = 0.01:30:13:log
    delta_over_f = 0, 0.05, 0.1
    n_seeds = 32

    [grid]
    eta_max = auto
    samples = 2048

Lists are comma separated; ``a:b:n`` is ``n`` evenly spaced values from
``a`` to ``b`` inclusive and ``a:b:n:log`` the logarithmic analogue.
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .liouvillian import ModelParams

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "parse_axis", "ENGINES"]

ENGINES = ("exact", "meanfield", "cumulant", "oracle")

_KNOWN = {
    "run": {"engine", "output", "report", "compare"},
    "model": {"n_spins", "gamma", "g_over_f", "f", "pump_w", "detuning", "disorder_over_f", "seed"},
    "scan": {"n_spins", "g_over_f", "w_over_f", "delta_over_f", "n_seeds", "seeds"},
    "grid": {"eta_max", "samples", "fit_periods", "eta_probe", "d_eta"},
}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


def parse_axis(text: str, path: str, integer: bool = False) -> tuple:
    text = text.strip()
    if not text:
        raise ConfigError(f"{path}: empty axis")
    try:
        if ":" in text:
            parts = [p.strip() for p in text.split(":")]
            if len(parts) not in (3, 4):
                raise ConfigError(f"{path}: range must be a:b:n or a:b:n:log")
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
            if n < 1:
                raise ConfigError(f"{path}: range needs at least one point")
            if len(parts) == 4:
                if parts[3] != "log":
                    raise ConfigError(f"{path}: unknown range spacing {parts[3]!r}")
                if a <= 0 or b <= 0:
                    raise ConfigError(f"{path}: log range needs positive ends")
                vals = np.geomspace(a, b, n)
            else:
                vals = np.linspace(a, b, n)
        else:
            vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: cannot parse {text!r}") from exc
    if integer:
        out = []
        for v in vals:
            if float(v) != int(round(float(v))):
                raise ConfigError(f"{path}: expected integers, got {v}")
            out.append(int(round(float(v))))
        return tuple(out)
    # round-trip through repr keeps the values identical across runs
    return tuple(float(repr(float(v))) for v in vals)


@dataclass(frozen=True)
class RunConfig:
    engine: str = "exact"
    output: str = "results"
    report: bool = False
    compare: str = ""
    n_spins: int = 10
    gamma: float = 1.0
    g_over_f: float = 0.5
    f: float = 1.0
    pump_w: float | str = "optimal"
    detuning: float = 0.0
    disorder_over_f: float = 0.0
    seed: int = 0
    scan_n_spins: tuple = ()
    scan_g_over_f: tuple = ()
    scan_w_over_f: tuple = ()
    scan_delta_over_f: tuple = ()
    seeds: tuple = tuple(range(32))
    eta_max: float | str = "auto"
    samples: int = 2048
    fit_periods: float = 8.0
    eta_probe: float = 0.03
    d_eta: float = 0.002
    source_text: str = field(default="", repr=False, compare=False)

    def params(self, n_spins: int | None = None, g_over_f: float | None = None,
               w_over_f: float | None = None) -> ModelParams:
        """Model parameters for one scan cell; ``optimal`` pump resolves per cell."""
        n = self.n_spins if n_spins is None else n_spins
        g = (self.g_over_f if g_over_f is None else g_over_f) * self.f
        if w_over_f is not None:
            w = w_over_f * self.f * self.gamma
        elif self.pump_w == "optimal":
            w = self.f * n * self.gamma / 2
        else:
            w = float(self.pump_w)
        return ModelParams(n, self.gamma, g, self.f, w, self.detuning)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def canonical(self) -> str:
        # where results go does not change them
        items = {k: v for k, v in self.__dict__.items() if k not in ("source_text", "output")}
        return "\n".join(f"{k}={items[k]!r}" for k in sorted(items))


def _get(cp, section, key, conv, path_default):
    if not cp.has_option(section, key):
        return path_default
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{section}.{key}: invalid value {raw!r}") from exc


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _int(text):
    v = float(text)
    if v != int(v):
        raise ValueError(text)
    return int(v)


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"<file>: {exc}") from exc
    for section in cp.sections():
        if section not in _KNOWN:
            raise ConfigError(f"{section}: unknown section")
        for key in cp.options(section):
            if key not in _KNOWN[section]:
                raise ConfigError(f"{section}.{key}: unknown field")

    d = RunConfig()
    kw = {}
    kw["engine"] = _get(cp, "run", "engine", str.strip, d.engine)
    if kw["engine"] not in ENGINES:
        raise ConfigError(f"run.engine: must be one of {ENGINES}, got {kw['engine']!r}")
    kw["output"] = _get(cp, "run", "output", str.strip, d.output)
    kw["report"] = _get(cp, "run", "report", _bool, d.report)
    kw["compare"] = _get(cp, "run", "compare", str.strip, d.compare)
    if kw["compare"] and kw["compare"] not in ENGINES:
        raise ConfigError(f"run.compare: must be one of {ENGINES}")

    kw["n_spins"] = _get(cp, "model", "n_spins", _int, d.n_spins)
    kw["gamma"] = _get(cp, "model", "gamma", float, d.gamma)
    kw["g_over_f"] = _get(cp, "model", "g_over_f", float, d.g_over_f)
    kw["f"] = _get(cp, "model", "f", float, d.f)
    pump = _get(cp, "model", "pump_w", str.strip, "optimal")
    if pump != "optimal":
        try:
            pump = float(pump)
        except ValueError as exc:
            raise ConfigError(f"model.pump_w: expected a number or 'optimal', got {pump!r}") from exc
        if pump <= 0:
            raise ConfigError("model.pump_w: must be positive")
    kw["pump_w"] = pump
    kw["detuning"] = _get(cp, "model", "detuning", float, d.detuning)
    kw["disorder_over_f"] = _get(cp, "model", "disorder_over_f", float, d.disorder_over_f)
    kw["seed"] = _get(cp, "model", "seed", _int, d.seed)
    if kw["n_spins"] < 1:
        raise ConfigError("model.n_spins: must be a positive integer")
    for key in ("gamma", "f"):
        if not kw[key] > 0:
            raise ConfigError(f"model.{key}: must be positive")
    if kw["disorder_over_f"] < 0:
        raise ConfigError("model.disorder_over_f: must be non-negative")

    axes = {"n_spins": True, "g_over_f": False, "w_over_f": False, "delta_over_f": False}
    for key, integer in axes.items():
        if cp.has_option("scan", key):
            vals = parse_axis(cp.get("scan", key), f"scan.{key}", integer)
            if key == "n_spins" and any(v < 1 for v in vals):
                raise ConfigError("scan.n_spins: values must be positive")
            if key in ("g_over_f",) and any(v < 0 for v in vals):
                raise ConfigError(f"scan.{key}: values must be non-negative")
            if key in ("w_over_f",) and any(v <= 0 for v in vals):
                raise ConfigError(f"scan.{key}: rates must be positive")
            if key == "delta_over_f" and any(v < 0 for v in vals):
                raise ConfigError("scan.delta_over_f: widths must be non-negative")
            kw[f"scan_{key}"] = vals
    if cp.has_option("scan", "seeds"):
        kw["seeds"] = parse_axis(cp.get("scan", "seeds"), "scan.seeds", integer=True)
    elif cp.has_option("scan", "n_seeds"):
        n = _get(cp, "scan", "n_seeds", _int, 32)
        if n < 1:
            raise ConfigError("scan.n_seeds: must be positive")
        kw["seeds"] = tuple(range(n))

    eta = _get(cp, "grid", "eta_max", str.strip, "auto")
    if eta != "auto":
        try:
            eta = float(eta)
        except ValueError as exc:
            raise ConfigError(f"grid.eta_max: expected a number or 'auto', got {eta!r}") from exc
        if eta <= 0:
            raise ConfigError("grid.eta_max: must be positive")
    kw["eta_max"] = eta
    kw["samples"] = _get(cp, "grid", "samples", _int, d.samples)
    if kw["samples"] < 64:
        raise ConfigError("grid.samples: need at least 64 samples")
    kw["fit_periods"] = _get(cp, "grid", "fit_periods", float, d.fit_periods)
    kw["eta_probe"] = _get(cp, "grid", "eta_probe", float, d.eta_probe)
    kw["d_eta"] = _get(cp, "grid", "d_eta", float, d.d_eta)
    if not 0 < kw["d_eta"] < kw["eta_probe"]:
        raise ConfigError("grid.d_eta: must lie in (0, eta_probe)")
    return RunConfig(source_text=text, **kw)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"<file>: cannot read {path}: {exc.strerror}") from exc
    return parse_config(text)
