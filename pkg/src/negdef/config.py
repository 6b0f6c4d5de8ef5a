"""Pipeline configuration: flat TOML with dotted keys.

Example::

    group.kind = "heisenberg3"
    radius = 40
    d_target = 4.4
    depth = 8
    fit.window = [15, 40]
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python < 3.11
    import tomli

from .errors import ConfigError, InvalidGenerator
from .group_core import spec_from_dict
from .growth import check_params

_ALLOWED = {
    "group.kind",
    "group.rank",
    "group.size",
    "group.generators",
    "group.factors",
    "radius",
    "d_target",
    "beta",
    "gamma",
    "depth",
    "p_max",
    "fit.window",
    "samples.cnd_sets",
    "samples.cnd_size",
    "samples.cnd_trials",
    "samples.psd_sets",
    "samples.radius",
    "samples.ell_extra",
    "samples.sphere_cap",
    "t_grid",
    "heat_t",
    "seed",
    "cache_dir",
    "output_dir",
    "threads",
    "budget",
    "combination.contexts",
}


@dataclass(frozen=True)
class Config:
    group: dict
    radius: int
    d_target: float | None = None
    beta: float | None = None
    gamma: float | None = None
    depth: int = 8
    p_max: int = 6
    fit_window: tuple | None = None
    cnd_sets: int = 20
    cnd_size: int = 12
    cnd_trials: int = 25
    psd_sets: int = 100
    sample_radius: int | None = None
    ell_extra: int = 200
    sphere_cap: int = 500
    t_grid: tuple = (0.1, 1.0, 10.0)
    heat_t: tuple = (0.1, 1.0, 10.0)
    seed: int = 0
    cache_dir: str | None = None
    output_dir: str = "out"
    threads: int = 1
    budget: int = 20_000_000
    combination_contexts: int = 4
    extra: dict = field(default_factory=dict)

    @property
    def window(self):
        if self.fit_window is not None:
            return tuple(self.fit_window)
        return (max(2, self.radius // 2), self.radius)

    def group_spec(self):
        return spec_from_dict(self.group)

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict) and not key.startswith("group.factors"):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _line_of(text, key):
    last = key.split(".")[-1]
    pat = re.compile(rf"^\s*([\w.]*\.)?{re.escape(last)}\s*=")
    for i, line in enumerate(text.splitlines(), start=1):
        if pat.match(line):
            return i
    return None


def parse_config(text, source="<config>"):
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    flat = _flatten(raw)
    unknown = sorted(set(flat) - _ALLOWED)
    if unknown:
        line = _line_of(text, unknown[0])
        where = f"{source}:{line}" if line else source
        raise ConfigError(f"{where}: unknown key {unknown[0]!r}")

    def err(key, msg):
        line = _line_of(text, key)
        where = f"{source}:{line}" if line else source
        return ConfigError(f"{where}: {key}: {msg}")

    group = {k.split(".", 1)[1]: v for k, v in flat.items() if k.startswith("group.")}
    if "kind" not in group:
        raise err("group.kind", "missing")
    try:
        spec_from_dict(group)
    except InvalidGenerator as exc:
        raise err("group.kind", str(exc)) from None
    if "radius" not in flat:
        raise err("radius", "missing")
    kw = {"group": group, "radius": int(flat["radius"])}
    simple = {
        "d_target": float,
        "beta": float,
        "gamma": float,
        "depth": int,
        "p_max": int,
        "seed": int,
        "cache_dir": str,
        "output_dir": str,
        "threads": int,
        "budget": int,
    }
    for key, typ in simple.items():
        if key in flat:
            try:
                kw[key] = typ(flat[key])
            except (TypeError, ValueError):
                raise err(key, f"expected {typ.__name__}") from None
    renames = {
        "fit.window": ("fit_window", lambda v: tuple(int(x) for x in v)),
        "samples.cnd_sets": ("cnd_sets", int),
        "samples.cnd_size": ("cnd_size", int),
        "samples.cnd_trials": ("cnd_trials", int),
        "samples.psd_sets": ("psd_sets", int),
        "samples.radius": ("sample_radius", int),
        "samples.ell_extra": ("ell_extra", int),
        "samples.sphere_cap": ("sphere_cap", int),
        "t_grid": ("t_grid", lambda v: tuple(float(x) for x in v)),
        "heat_t": ("heat_t", lambda v: tuple(float(x) for x in v)),
        "combination.contexts": ("combination_contexts", int),
    }
    for key, (name, conv) in renames.items():
        if key in flat:
            try:
                kw[name] = conv(flat[key])
            except (TypeError, ValueError):
                raise err(key, "malformed value") from None
    cfg = Config(**kw)
    validate(cfg, err)
    return cfg


def validate(cfg, err=None):
    err = err or (lambda key, msg: ConfigError(f"{key}: {msg}"))
    if cfg.radius < 2:
        raise err("radius", "must be at least 2")
    if (cfg.beta is None) != (cfg.gamma is None):
        raise err("beta", "beta and gamma must be given together")
    if cfg.beta is not None:
        try:
            check_params(cfg.beta, cfg.gamma)
        except ValueError as exc:
            raise err("gamma", str(exc)) from None
    elif cfg.d_target is None:
        raise err("d_target", "needed when beta and gamma are not given")
    if cfg.depth < 0:
        raise err("depth", "must be non-negative")
    if cfg.threads < 1:
        raise err("threads", "must be positive")
    lo, hi = cfg.window
    if lo < 2 or hi > cfg.radius or hi - lo + 1 < 4:
        raise err("fit.window", f"{cfg.window} must lie in [2, radius] and span >= 4 radii")


def load_config(path):
    path = Path(path)
    return parse_config(path.read_text(), str(path))
