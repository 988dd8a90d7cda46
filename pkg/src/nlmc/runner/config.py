"""Experiment recipes in INI form.

Example::

    [grid]
    n_fine = 128
    n_coarse = 16

    [media]
    source = generate
    contrast = 10000
    seed = 1

    [partition]
    mode = channelized

    [basis]
    layers = 5
    schedule = 8:3, 16:5, 32:6

    [source]
    f1 = constant:1
    f2 = static_default

Every key has a default; see ``ExperimentConfig``. Relative paths resolve
against the directory of the config file.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


SOURCE_KINDS = ("zero", "constant", "static_default", "five_spot", "sine", "file")

# (section, key) of every field, in text order
_LAYOUT = {
    "n_fine": "grid",
    "n_coarse": "grid",
    "media_source": "media",
    "contrast": "media",
    "seed": "media",
    "manifest": "media",
    "sigma": "media",
    "partition_mode": "partition",
    "threshold": "partition",
    "layers": "basis",
    "schedule": "basis",
    "workers": "basis",
    "tol_constraint": "basis",
    "f1": "source",
    "f2": "source",
    "T": "transient",
    "dt": "transient",
    "p0": "transient",
    "mass": "transient",
    "solver_method": "solver",
    "rtol": "solver",
    "decay_dof": "decay",
    "decay_layers": "decay",
    "max_global_unknowns": "decay",
    "output": "output",
}

# text key where it differs from the attribute name
_KEYS = {
    "media_source": "source",
    "partition_mode": "mode",
    "solver_method": "method",
    "decay_dof": "dof",
    "decay_layers": "layers",
    "output": "directory",
}


@dataclass
class ExperimentConfig:
    n_fine: int = 128
    n_coarse: int = 16
    media_source: str = "generate"
    contrast: float = 1e4
    seed: int = 1
    manifest: str | None = None
    sigma: float | None = None
    partition_mode: str = "channelized"
    threshold: float | None = None
    layers: int = 5
    schedule: tuple[tuple[int, int], ...] = ()
    workers: int = 1
    tol_constraint: float = 1e-9
    f1: str = "constant:1"
    f2: str = "static_default"
    T: float = 5.0
    dt: float = 0.25
    p0: str = "zero"
    mass: str = "galerkin"
    solver_method: str = "direct"
    rtol: float = 1e-10
    decay_dof: str = "center"
    decay_layers: tuple[int, ...] = (0, 1, 2, 3, 4)
    max_global_unknowns: int = 200_000
    output: str = "out"
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    @property
    def refine(self) -> int:
        return self.n_fine // self.n_coarse

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def entries(self) -> list[tuple[int, int]]:
        """``(n_coarse, m)`` pairs to run: the schedule, or the single pair."""
        return list(self.schedule) or [(self.n_coarse, self.layers)]

    def with_(self, **kw) -> ExperimentConfig:
        return replace(self, **kw)

    # --- text form ----------------------------------------------------------

    def to_text(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        for f in fields(self):
            if f.name == "base_dir":
                continue
            section = _LAYOUT[f.name]
            if not parser.has_section(section):
                parser.add_section(section)
            parser.set(section, _KEYS.get(f.name, f.name), _format(getattr(self, f.name)))
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str, base_dir: str | Path = ".") -> ExperimentConfig:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from None
        known = {(sec, _KEYS.get(name, name)): name for name, sec in _LAYOUT.items()}
        kwargs = {}
        defaults = cls()
        for section in parser.sections():
            for key, raw in parser.items(section):
                name = known.get((section, key))
                if name is None:
                    raise ConfigError(f"unknown key [{section}] {key}")
                kwargs[name] = _parse(name, raw, getattr(defaults, name))
        return cls(**kwargs, base_dir=Path(base_dir))

    @classmethod
    def from_file(cls, path: str | Path) -> ExperimentConfig:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        return cls.from_text(path.read_text(), path.parent)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    # --- validation ---------------------------------------------------------

    def validate(self) -> ExperimentConfig:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.n_fine >= 1 and self.n_coarse >= 1, "grid sizes must be positive")
        need(self.n_fine % self.n_coarse == 0, f"n_coarse={self.n_coarse} does not divide n_fine={self.n_fine}")
        for nc, m in self.entries():
            need(nc >= 1 and self.n_fine % nc == 0, f"schedule entry {nc}:{m}: {nc} does not divide n_fine={self.n_fine}")
            need(m >= 0, f"schedule entry {nc}:{m}: layers must be >= 0")
        need(self.layers >= 0, "layers must be >= 0")
        need(self.media_source in ("generate", "files"), f"media source must be generate or files, got {self.media_source!r}")
        need(self.contrast >= 1, "contrast must be >= 1")
        if self.media_source == "files":
            need(self.manifest is not None, "media source 'files' needs a manifest path")
            need(self.resolve(self.manifest).is_file(), f"media manifest not found: {self.resolve(self.manifest)}")
        need(self.sigma is None or self.sigma >= 0, "sigma must be nonnegative")
        need(self.partition_mode in ("single", "channelized"), f"unknown partition mode {self.partition_mode!r}")
        need(self.threshold is None or self.threshold > 0, "threshold must be positive")
        need(self.workers >= 1, "workers must be >= 1")
        need(self.tol_constraint > 0 and self.rtol > 0, "tolerances must be positive")
        for name in ("f1", "f2"):
            spec = getattr(self, name)
            kind = spec.split(":", 1)[0]
            need(kind in SOURCE_KINDS, f"{name}: unknown source kind {kind!r}")
            if kind == "constant":
                try:
                    float(spec.split(":", 1)[1])
                except (IndexError, ValueError):
                    raise ConfigError(f"{name}: expected constant:<value>, got {spec!r}") from None
            if kind == "file":
                path = self.resolve(spec.split(":", 1)[1])
                need(path.is_file(), f"{name}: source file not found: {path}")
        need(self.dt > 0 and self.T > 0, "T and dt must be positive")
        steps = round(self.T / self.dt)
        need(steps >= 1 and abs(steps * self.dt - self.T) <= 1e-12 * self.T, f"T={self.T} is not a multiple of dt={self.dt}")
        need(self.p0 == "zero" or self.resolve(self.p0).is_file(), f"initial condition file not found: {self.p0}")
        need(self.mass in ("galerkin", "lumped"), f"mass must be galerkin or lumped, got {self.mass!r}")
        need(self.solver_method in ("direct", "cg"), f"unknown solver method {self.solver_method!r}")
        need(all(m >= 0 for m in self.decay_layers), "decay layers must be >= 0")
        if self.decay_dof != "center":
            try:
                i, j, l = (int(t) for t in self.decay_dof.split(","))
            except ValueError:
                raise ConfigError(f"decay dof must be 'center' or 'i,j,l', got {self.decay_dof!r}") from None
            need(i in (1, 2) and 0 <= j < self.n_coarse**2 and l >= 0, f"decay dof {self.decay_dof} out of range")
        return self


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ", ".join(f"{a}:{b}" for a, b in value)
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(name: str, raw: str, default):
    raw = raw.strip()
    try:
        if name == "schedule":
            if not raw:
                return ()
            pairs = []
            for item in raw.split(","):
                a, b = item.split(":")
                pairs.append((int(a), int(b)))
            return tuple(pairs)
        if name == "decay_layers":
            return tuple(int(t) for t in raw.split(",") if t.strip())
        if name in ("manifest", "sigma", "threshold"):
            if not raw:
                return None
            return raw if name == "manifest" else float(raw)
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
