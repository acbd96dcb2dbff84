"""INI run configuration: documented defaults, typed parsing, strict keys."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path


class ConfigError(ValueError):
    pass


def _floats(text):
    return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _ints(text):
    return tuple(int(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _words(text):
    return tuple(v.strip() for v in str(text).split(",") if v.strip())


def _bool(text):
    val = str(text).strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _extents(text):
    pairs = []
    for chunk in str(text).split(";"):
        lo, hi = _floats(chunk)
        pairs.append((lo, hi))
    return tuple(pairs)


def _optional_float(text):
    return None if str(text).strip().lower() in ("", "auto", "none") else float(text)


# section -> key -> (parser, default, description)
SCHEMA: dict[str, dict[str, tuple]] = {
    "run": {
        "seed": (int, "0", "seed for every randomised sweep"),
    },
    "domain": {
        "m": (int, "1", "dimension of the x block"),
        "k": (int, "1", "dimension of the y block"),
        "gamma": (float, "0.0", "Grushin exponent, >= 0"),
        "extents": (_extents, "0,1;0,1", "box as lo,hi pairs separated by ';' (x axes first)"),
        "grid": (_ints, "64", "cells per axis; one value for all axes or one per axis"),
    },
    "solver": {
        "p": (float, "2.0", "exponent p > 1"),
        "max_iterations": (int, "5000", "descent iteration cap"),
        "tolerance": (float, "1e-12", "stop when the relative quotient drop falls below this"),
        "random_restarts": (int, "0", "extra seeded starting guesses"),
    },
    "constants": {
        "which": (_words, "all", "cp, c1, c2, c3 or all (cp for p >= 2, c1-c3 for p < 2)"),
        "p_values": (_floats, "1.1,1.5,1.9,2,2.5,3,4,6", "sweep of p values"),
        "search_radius": (float, "1000", "outer radius of the (s, t) scan"),
        "coarse_grid": (int, "2001", "scan points per polar axis"),
        "refine_tol": (float, "1e-8", "pattern-search and radius-doubling tolerance"),
    },
    "identity": {
        "p_values": (_floats, "1.5,2,3", "exponents in the case matrix"),
        "gammas": (_floats, "0,1", "Grushin exponents in the case matrix"),
        "extents": (_extents, "0,1;0,1", "box used for gamma = 0"),
        "grushin_extents": (_extents, "-1,1;0,1", "box used for gamma > 0 (straddles x = 0)"),
        "grids": (_ints, "64", "square grid sizes in the case matrix"),
        "families": (_words, "gaussian,cosine,complex", "built-in phi families"),
        "threshold": (float, "1e-2", "max main-identity rel_residual"),
        "attainment_threshold": (float, "1e-6", "max scaled residual at u = c phi1"),
        "attainment_grid": (int, "32", "grid for the eigenpair used in attainment rows"),
        "refinement": (_bool, "false", "also run the 32 -> 64 -> 128 refinement study"),
    },
    "pme": {
        "p": (_optional_float, "auto", "exponent; auto uses [solver] p"),
        "ell": (float, "1.0", "porous-medium exponent, >= 1"),
        "source": (str, "power", "zero, power or table"),
        "q": (float, "3.0", "power-law exponent"),
        "coef": (float, "1.0", "power-law coefficient"),
        "table": (str, "", "CSV file with columns u,f for the tabulated source"),
        "u0_amplitude": (float, "12.0", "u0 = amplitude * product of sines"),
        "certificate": (str, "blowup", "blowup, global or none"),
        "alpha": (float, "4.0", "certificate alpha"),
        "beta": (_optional_float, "auto", "certificate beta; auto = min(1, lambda1 (alpha-ell-1)/(ell+1))"),
        "theta": (float, "0.01", "certificate theta"),
        "t_max": (float, "0.2", "final time"),
        "blowup_factor": (float, "1e6", "blow-up threshold as a multiple of sup u0"),
        "record_every": (int, "1", "record every n-th step"),
    },
}


@dataclass
class RunConfig:
    sections: dict[str, dict] = field(default_factory=dict)
    source: str = "<defaults>"

    def __getitem__(self, section):
        return self.sections[section]

    @property
    def seed(self) -> int:
        return self.sections["run"]["seed"]


def _parse(section, key, raw):
    parser = SCHEMA[section][key][0]
    try:
        return parser(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the INI file, then ``overrides`` ({(section, key): raw})."""
    raw = {sec: {k: spec[1] for k, spec in keys.items()} for sec, keys in SCHEMA.items()}
    origin = "<defaults>"
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for sec in cp.sections():
            if sec not in SCHEMA:
                raise ConfigError(f"{path}: unknown section [{sec}]")
            for key, val in cp.items(sec):
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"{path}: unknown key {key!r} in [{sec}]")
                raw[sec][key] = val
        origin = str(path)
    for (sec, key), val in (overrides or {}).items():
        if sec not in SCHEMA or key not in SCHEMA[sec]:
            raise ConfigError(f"unknown override {sec}.{key}")
        raw[sec][key] = str(val)
    parsed = {sec: {k: _parse(sec, k, v) for k, v in keys.items()} for sec, keys in raw.items()}
    return RunConfig(parsed, origin)


def bundled_config(name: str) -> Path:
    """Path of a config file shipped with the package (e.g. ``blowup.ini``)."""
    ref = resources.files("grushinlab") / "configs" / name
    if not ref.is_file():
        raise ConfigError(f"no bundled config named {name!r}")
    return Path(str(ref))


def describe_defaults() -> str:
    lines = []
    for sec, keys in SCHEMA.items():
        lines.append(f"[{sec}]")
        for key, (_, default, doc) in keys.items():
            lines.append(f"{key} = {default}    ; {doc}")
        lines.append("")
    return "\n".join(lines)
