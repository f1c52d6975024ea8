"""Run configuration: INI files with a ``[run]`` section and per-experiment overrides.

Example::

    [run]
    profile = isotropic
    eps = 1e-2, 5e-3, 2.5e-3
    seed = 7

    [gamma-limit-2d]
    s = 1
    normal_deg = 30
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigurationError

EXPERIMENTS = (
    "kernel-check",
    "energy",
    "line-tension",
    "relax",
    "gamma-limit-2d",
    "gamma-limit-1d",
    "scan-scales",
)


def default_eps_grid(start=1e-2, stop=1e-4, ratio=0.5):
    """Geometric grid ``start * ratio**j`` while it stays ``>= stop``."""
    out = []
    e = start
    while e >= stop * (1.0 - 1e-12):
        out.append(e)
        e *= ratio
    return tuple(out)


@dataclass
class RunConfig:
    """Validated parameters of one experiment run."""

    experiment: str
    profile: str = "isotropic"
    dimension: int = 1
    eps: tuple = field(default_factory=default_eps_grid)
    resolution: int = 256
    normal_deg: float = 0.0
    s: tuple = (1.0,)
    poisson: float | None = None
    rel_tol: float | None = None
    seed: int = 0
    jumps: tuple = (0.0,)
    sweep: int = 16
    grid: int = 32
    method: str = "planar"
    k: int = 6
    m: int = 3
    budget: float = 1.0
    zeta: float = 0.25
    field_path: str | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def normal(self):
        t = math.radians(self.normal_deg)
        return (math.cos(t), math.sin(t))

    def tolerance(self, anisotropic=False):
        if self.rel_tol is not None:
            return self.rel_tol
        return 0.12 if anisotropic else 0.10

    def resolve(self, path):
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def to_dict(self):
        out = {}
        for k, v in self.__dict__.items():
            if k == "base_dir":
                continue
            out[k] = list(v) if isinstance(v, tuple) else v
        return out


def _floats(text):
    return tuple(float(x) for x in re.split(r"[,\s]+", text.strip()) if x)


_PARSERS = {
    "profile": str,
    "dimension": int,
    "eps": _floats,
    "resolution": int,
    "normal_deg": float,
    "s": _floats,
    "poisson": float,
    "rel_tol": float,
    "seed": int,
    "jumps": _floats,
    "sweep": int,
    "grid": int,
    "method": str,
    "k": int,
    "m": int,
    "budget": float,
    "zeta": float,
    "field": str,
}


def _key_line(path, section, key):
    """Line number of ``key`` inside ``[section]``, for diagnostics."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError:
        return None
    cur = None
    for n, line in enumerate(lines, start=1):
        st = line.strip()
        if st.startswith("[") and st.endswith("]"):
            cur = st[1:-1].strip()
        elif cur == section and re.match(rf"{re.escape(key)}\s*[=:]", st):
            return n
    return None


def _where(path, section, key):
    if path is None:
        return f"[{section}] {key}"
    line = _key_line(path, section, key)
    return f"{path}:{line}: [{section}] {key}" if line else f"{path}: [{section}] {key}"


def validate(cfg, path=None, origin=None):
    """Check invariants; ``origin`` maps keys to the section they came from."""
    origin = origin or {}

    def fail(key, msg):
        raise ConfigurationError(f"{_where(path, origin.get(key, 'run'), key)}: {msg}")

    if cfg.experiment not in EXPERIMENTS:
        raise ConfigurationError(f"unknown experiment {cfg.experiment!r}")
    eps = cfg.eps
    if not eps:
        fail("eps", "needs at least one value")
    for e in eps:
        if not 0.0 < e < math.exp(-1.0):
            fail("eps", f"value {e!r} outside (0, 1/e)")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        fail("eps", "values must be strictly decreasing")
    if cfg.resolution < 8:
        fail("resolution", "must be at least 8")
    if cfg.dimension < 1:
        fail("dimension", "must be positive")
    if cfg.poisson is not None and not -1.0 <= cfg.poisson < 0.5:
        fail("poisson", f"{cfg.poisson!r} outside [-1, 1/2)")
    if cfg.rel_tol is not None and not cfg.rel_tol > 0:
        fail("rel_tol", "must be positive")
    if cfg.sweep < 1:
        fail("sweep", "must be positive")
    if cfg.grid < 8:
        fail("grid", "must be at least 8")
    if cfg.method not in ("planar", "grid"):
        fail("method", "must be 'planar' or 'grid'")
    if cfg.m < 3:
        fail("m", "must be at least 3")
    if cfg.k < 1:
        fail("k", "must be positive")
    if not 0.0 < cfg.zeta < 0.5:
        fail("zeta", "must lie in (0, 1/2)")
    if cfg.seed < 0 or cfg.seed >= 2**64:
        fail("seed", "must be an unsigned 64-bit integer")
    return cfg


def load_config(path, experiment, seed=None):
    """Read ``path`` (or only defaults when ``None``) for ``experiment``."""
    cfg = RunConfig(experiment)
    origin = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file {path} not found")
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc
        cfg.base_dir = path.resolve().parent
        for section in ("run", experiment):
            if not cp.has_section(section):
                continue
            for key, raw in cp.items(section):
                if key not in _PARSERS:
                    raise ConfigurationError(f"{_where(path, section, key)}: unknown key")
                try:
                    val = _PARSERS[key](raw)
                except ValueError as exc:
                    raise ConfigurationError(f"{_where(path, section, key)}: cannot parse {raw!r} ({exc})") from exc
                origin[key] = section
                setattr(cfg, "field_path" if key == "field" else key, val)
    if seed is not None:
        cfg.seed = int(seed)
    return validate(cfg, path, origin)
