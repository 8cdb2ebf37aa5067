"""Run configuration: parsing, validation, overrides and the config hash.

Grammar of the text format (``configparser`` sections, ``key = value``)::

    [run]
    suites = clifford, intertwine-laplacian   ; comma separated
    seed = 0
    samples = 20

    [group.<name>]         ; one or more
    l = 3
    a = 1
    b = 1
    epsilon = 0.0          ; optional perturbation of the Clifford module
    seed = 42              ; seed of the perturbation

    [basis]
    mode = constant        ; or changing

    [quad]
    preset = l3-default

    [stencil]
    h = 1e-3

    [tol]
    <check> = <float>      ; entries of the tolerance ledger

    [spectrum]
    level = 6
    gammas = e1; e1+e2; random
    pair = H(1,1,3):H(2,0,3)

    [radon]
    n = 24

A JSON document with the same sections (objects) is accepted as well.
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

from .quadrature import PRESETS

__all__ = ["ConfigError", "GroupSpec", "RunConfig", "DEFAULT_TOLERANCES", "SUITES",
           "load_config", "parse_config_text", "apply_overrides", "config_hash", "canonical_json",
           "default_config"]

SUITES = ("clifford", "theta-eigen", "projection", "identities", "intertwine-laplacian", "parity",
          "independence", "dirichlet", "z-neumann", "neumann", "boundary")

DEFAULT_TOLERANCES = {
    "clifford": 0.0,
    "theta-eigen": 0.0,
    "projection": 0.0,
    "identities": 1e-5,
    "intertwine-laplacian": 1e-4,
    "parity": 0.0,
    "independence": 1e-8,
    "dirichlet": 1e-8,
    "z-neumann": 1e-6,
    "z-neumann-identity": 1e-4,
    "second-radial-identity": 1e-4,
    "neumann-span": 1e-8,
    "boundary-laplacian": 1e-4,
    "spectrum": 1e-9,
    "radon-dual": 1e-6,
    "radon-pairing": 1e-4,
    "radon-odd": 1e-2,
    "radon-even": 1e-2,
}


class ConfigError(ValueError):
    """Malformed configuration; the message names the line or field."""


@dataclass(frozen=True)
class GroupSpec:
    name: str
    l: int
    a: int
    b: int
    epsilon: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.l < 1:
            raise ConfigError(f"group {self.name!r}: l must be >= 1")
        if self.a < 0 or self.b < 0:
            raise ConfigError(f"group {self.name!r}: a and b must be >= 0")
        if self.a + self.b == 0:
            raise ConfigError(f"group {self.name!r}: a + b = 0 gives an empty X-space")
        if self.epsilon < 0:
            raise ConfigError(f"group {self.name!r}: epsilon must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    groups: tuple = ()
    suites: tuple = SUITES
    seed: int = 0
    samples: int = 20
    basis_mode: str = "constant"
    quad_preset: str = "l3-default"
    step: float = 1e-3
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    spectrum: dict = field(default_factory=lambda: {"level": 6, "gammas": ["e1", "e1+e2", "random"],
                                                    "pair": "H(1,1,3):H(2,0,3)"})
    radon: dict = field(default_factory=lambda: {"n": 24})

    def __post_init__(self):
        if self.basis_mode not in ("constant", "changing"):
            raise ConfigError(f"[basis] mode: expected 'constant' or 'changing', got {self.basis_mode!r}")
        if self.quad_preset not in PRESETS:
            raise ConfigError(f"[quad] preset: unknown preset {self.quad_preset!r}")
        for s in self.suites:
            if s not in SUITES:
                raise ConfigError(f"[run] suites: unknown suite {s!r}")
        if self.samples < 1:
            raise ConfigError("[run] samples must be >= 1")
        if self.step <= 0:
            raise ConfigError("[stencil] h must be positive")
        names = [g.name for g in self.groups]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate group names")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["groups"] = [asdict(g) for g in self.groups]
        d["suites"] = list(self.suites)
        return d


def default_config() -> RunConfig:
    return RunConfig(groups=(GroupSpec("H113", 3, 1, 1), GroupSpec("P113", 3, 1, 1, 0.02, 42)))


def _as(kind, value, where: str):
    try:
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if kind is float:
            return float(value)
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected {kind.__name__}, got {value!r}") from None


def _from_sections(sec: dict, lines: Optional[dict] = None) -> RunConfig:
    lines = lines or {}

    def where(s, k):
        ln = lines.get((s, k))
        return f"[{s}] {k}" + (f" (line {ln})" if ln else "")

    known = {"run", "basis", "quad", "stencil", "tol", "spectrum", "radon"}
    for s in sec:
        if s not in known and not s.startswith("group."):
            raise ConfigError(f"unknown section [{s}]")
    base = default_config()
    groups = []
    for s in sec:
        if s.startswith("group."):
            g = sec[s]
            for key in g:
                if key not in ("l", "a", "b", "epsilon", "seed"):
                    raise ConfigError(f"{where(s, key)}: unknown field")
            for key in ("l", "a", "b"):
                if key not in g:
                    raise ConfigError(f"[{s}]: missing field {key!r}")
            groups.append(GroupSpec(s[len("group."):], _as(int, g["l"], where(s, "l")),
                                    _as(int, g["a"], where(s, "a")), _as(int, g["b"], where(s, "b")),
                                    _as(float, g.get("epsilon", 0.0), where(s, "epsilon")),
                                    _as(int, g.get("seed", 0), where(s, "seed"))))
    run = sec.get("run", {})
    suites = run.get("suites", list(base.suites))
    if isinstance(suites, str):
        suites = [x.strip() for x in suites.split(",") if x.strip()]
    tol = dict(DEFAULT_TOLERANCES)
    for k, v in sec.get("tol", {}).items():
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"{where('tol', k)}: unknown tolerance key")
        tol[k] = _as(float, v, where("tol", k))
    spec = dict(base.spectrum)
    for k, v in sec.get("spectrum", {}).items():
        if k == "level":
            spec[k] = _as(int, v, where("spectrum", k))
        elif k == "gammas":
            spec[k] = [x.strip() for x in v.split(";")] if isinstance(v, str) else list(v)
        elif k == "pair":
            spec[k] = str(v)
        else:
            raise ConfigError(f"{where('spectrum', k)}: unknown field")
    rad = dict(base.radon)
    for k, v in sec.get("radon", {}).items():
        if k != "n":
            raise ConfigError(f"{where('radon', k)}: unknown field")
        rad[k] = _as(int, v, where("radon", k))
    return RunConfig(
        groups=tuple(groups) if groups else base.groups,
        suites=tuple(suites),
        seed=_as(int, run.get("seed", 0), where("run", "seed")),
        samples=_as(int, run.get("samples", 20), where("run", "samples")),
        basis_mode=str(sec.get("basis", {}).get("mode", "constant")),
        quad_preset=str(sec.get("quad", {}).get("preset", "l3-default")),
        step=_as(float, sec.get("stencil", {}).get("h", 1e-3), where("stencil", "h")),
        tolerances=tol, spectrum=spec, radon=rad)


def parse_config_text(text: str, fmt: str = "ini") -> RunConfig:
    """Parse INI-style or JSON configuration text."""
    if fmt == "json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"JSON parse error at line {e.lineno}, column {e.colno}: {e.msg}") from None
        if not isinstance(doc, dict) or not all(isinstance(v, dict) for v in doc.values()):
            raise ConfigError("JSON config must map section names to objects")
        return _from_sections(doc)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"parse error: {e}") from None
    lines = {}
    section = None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
        elif "=" in s and section and not s.startswith((";", "#")):
            lines[(section, s.split("=", 1)[0].strip().lower())] = i
    sec = {s: dict(cp[s]) for s in cp.sections()}
    return _from_sections(sec, lines)


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e.strerror}") from None
    return parse_config_text(text, "json" if p.suffix.lower() == ".json" else "ini")


def apply_overrides(cfg: RunConfig, seed: Optional[int] = None, suites=None,
                    tol_overrides=()) -> RunConfig:
    """Command-line overrides; ``tol_overrides`` holds ``KEY=VAL`` strings."""
    tol = dict(cfg.tolerances)
    for item in tol_overrides:
        if "=" not in item:
            raise ConfigError(f"--tol-override {item!r}: expected KEY=VAL")
        k, v = item.split("=", 1)
        k = k.strip()
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"--tol-override: unknown tolerance key {k!r}")
        tol[k] = _as(float, v.strip(), f"--tol-override {k}")
    kw = {"tolerances": tol}
    if seed is not None:
        kw["seed"] = seed
    if suites:
        kw["suites"] = tuple(suites)
    return replace(cfg, **kw)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 of the canonical JSON form of the configuration."""
    return hashlib.sha256(canonical_json(cfg.to_dict()).encode()).hexdigest()
