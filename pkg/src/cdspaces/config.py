"""Run configuration: INI files with sections, overridable from the command line.

Recognized sections are ``[space]``, ``[grid]``, ``[run]`` and one block per
command (``[verify-cd]``, ``[convexity]``, ``[mgh]``, ``[branching]``,
``[no-map]``, ``[dimension]``, ``[strict]``). Errors carry the line of the
offending entry.
"""

import configparser
import re
from dataclasses import dataclass, field
from typing import Dict, Optional

from .profiles import DEFAULT_K, PRESETS

SECTIONS = ("space", "grid", "run", "verify-cd", "convexity", "mgh", "branching", "no-map", "dimension", "strict")
SEED_MAX = 2 ** 64 - 1


class ConfigError(ValueError):
    def __init__(self, message, path=None, line=None):
        where = f"{path or '<config>'}" + (f":{line}" if line is not None else "")
        super().__init__(f"{where}: {message}")
        self.line = line


@dataclass
class RunConfig:
    profile: str = "valley"
    k: float = DEFAULT_K
    K: float = 16.0
    nprime: float = 515.0
    nx: int = 128
    nu: int = 32
    variant: str = "compact"
    R: float = 4.0
    out: Optional[str] = None
    seed: int = 0
    sections: Dict[str, Dict[str, str]] = field(default_factory=dict)
    path: Optional[str] = None
    lines: Dict[tuple, int] = field(default_factory=dict, repr=False)

    def _line(self, section, key):
        return self.lines.get((section, key))

    def raw(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def get_float(self, section, key, default, lo=None, hi=None):
        v = self.raw(section, key)
        if v is None:
            return default
        try:
            x = float(v)
        except ValueError:
            raise ConfigError(f"{key} = {v!r} is not a number", self.path, self._line(section, key)) from None
        if (lo is not None and x < lo) or (hi is not None and x > hi):
            raise ConfigError(f"{key} = {x} outside [{lo}, {hi}]", self.path, self._line(section, key))
        return x

    def get_int(self, section, key, default, lo=None, hi=None):
        v = self.raw(section, key)
        if v is None:
            return default
        try:
            x = int(v)
        except ValueError:
            raise ConfigError(f"{key} = {v!r} is not an integer", self.path, self._line(section, key)) from None
        if (lo is not None and x < lo) or (hi is not None and x > hi):
            raise ConfigError(f"{key} = {x} outside [{lo}, {hi}]", self.path, self._line(section, key))
        return x

    def get_floats(self, section, key, default):
        v = self.raw(section, key)
        if v is None:
            return list(default)
        try:
            return [float(s) for s in v.split(",") if s.strip()]
        except ValueError:
            raise ConfigError(f"{key} = {v!r} is not a comma-separated list of numbers",
                              self.path, self._line(section, key)) from None

    def get_str(self, section, key, default, choices=None):
        v = self.raw(section, key, default)
        if choices is not None and v not in choices:
            raise ConfigError(f"{key} = {v!r} not in {sorted(choices)}", self.path, self._line(section, key))
        return v

    def echo(self):
        """Config contents that determine the results (the output directory is excluded)."""
        return {
            "profile": self.profile, "k": self.k, "K": self.K, "nprime": self.nprime, "nx": self.nx,
            "nu": self.nu, "variant": self.variant, "R": self.R, "seed": self.seed,
            "sections": {s: dict(sorted(v.items())) for s, v in sorted(self.sections.items())
                         if s not in ("space", "grid", "run")},
        }


_SECTION = re.compile(r"^\s*\[([^\]]+)\]")
_ENTRY = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


def _line_index(text):
    out = {}
    section = None
    for n, line in enumerate(text.splitlines(), start=1):
        m = _SECTION.match(line)
        if m:
            section = m.group(1).strip()
            out[(section, None)] = n
            continue
        m = _ENTRY.match(line)
        if m and section is not None:
            out[(section, m.group(1).strip())] = n
    return out


def parse_config(text: str, path: Optional[str] = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str  # k and K are different keys
    try:
        cp.read_string(text, source=path or "<config>")
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError("entry before any [section] header", path, e.lineno) from None
    except configparser.DuplicateOptionError as e:
        raise ConfigError(f"duplicate key {e.option!r} in [{e.section}]", path, e.lineno) from None
    except configparser.DuplicateSectionError as e:
        raise ConfigError(f"duplicate section [{e.section}]", path, e.lineno) from None
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ConfigError("malformed line " + (repr(e.errors[0][1]) if e.errors else ""), path, line) from None
    lines = _line_index(text)
    sections = {}
    for s in cp.sections():
        if s not in SECTIONS:
            raise ConfigError(f"unknown section [{s}]", path, lines.get((s, None)))
        sections[s] = dict(cp.items(s))
    cfg = RunConfig(sections=sections, path=path, lines=lines)
    cfg.profile = cfg.get_str("space", "profile", cfg.profile)
    cfg.k = cfg.get_float("space", "k", cfg.k, 0.0, 0.25)
    cfg.K = cfg.get_float("space", "K", cfg.K, 1.0)
    cfg.variant = cfg.get_str("space", "variant", cfg.variant, {"compact", "noncompact"})
    cfg.R = cfg.get_float("space", "R", cfg.R, 0.0)
    cfg.nx = cfg.get_int("grid", "nx", cfg.nx, 2)
    cfg.nu = cfg.get_int("grid", "nu", cfg.nu, 2)
    cfg.nprime = cfg.get_float("run", "nprime", cfg.nprime, 1.0)
    cfg.seed = cfg.get_int("run", "seed", cfg.seed, 0, SEED_MAX)
    cfg.out = cfg.get_str("run", "out", None)
    validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", str(path)) from None
    return parse_config(text, str(path))


def validate(cfg: RunConfig):
    """Range checks shared by file and command-line values."""
    if not (0.0 < cfg.k < 0.25):
        raise ConfigError(f"k = {cfg.k} outside (0, 1/4)", cfg.path, cfg._line("space", "k"))
    if cfg.K < 1.0:
        raise ConfigError(f"K = {cfg.K} below 1", cfg.path, cfg._line("space", "K"))
    if cfg.nprime <= 1.0:
        raise ConfigError(f"nprime = {cfg.nprime} must exceed 1", cfg.path, cfg._line("run", "nprime"))
    if cfg.nx < 2 or cfg.nu < 2:
        raise ConfigError("nx and nu must be at least 2", cfg.path, cfg._line("grid", "nx"))
    if not (0 <= cfg.seed <= SEED_MAX):
        raise ConfigError(f"seed {cfg.seed} is not an unsigned 64-bit integer", cfg.path, cfg._line("run", "seed"))
    if cfg.profile not in PRESETS and not cfg.profile.strip():
        raise ConfigError("empty profile", cfg.path, cfg._line("space", "profile"))
    return cfg
