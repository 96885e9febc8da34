"""Plain ``key = value`` run configuration.

Recognized keys::

    preset         ps2 | mu2 | h2 | d2 | t2 | h2z | hehp
    z              nuclear charge, h2z only
    particle       mass charge [label]      (repeatable; instead of preset)
    group          comma-separated indices  (repeatable; identical particles)
    seed           unsigned 64-bit integer, default 1
    basis_target   final basis size, default 128 (192 for hehp)
    trials         candidates per growth step, default 32
    refine_cycles  refinement sweeps per stage, default 2
    theta_step     scan grid spacing in degrees, default 1
    radius         scan radius override in bohr
    d_min, d_max   pair-distance sampling range in bohr
    out            output directory, default "out"
"""
from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field, fields

from .ecg import default_scale_range
from .engine import DEFAULT_REFINE_CYCLES, DEFAULT_TRIALS, default_basis_size
from .system import Particle, SystemDefinition, build_system

_SCALAR_KEYS = {
    "preset": str,
    "z": float,
    "seed": int,
    "basis_target": int,
    "trials": int,
    "refine_cycles": int,
    "theta_step": float,
    "radius": float,
    "d_min": float,
    "d_max": float,
    "out": str,
}
_REPEATED_KEYS = ("particle", "group")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class RunConfig:
    preset: str | None = None
    z: float | None = None
    particles: tuple[Particle, ...] = ()
    groups: tuple[tuple[int, ...], ...] = ()
    seed: int = 1
    basis_target: int = 128
    trials: int = DEFAULT_TRIALS
    refine_cycles: int = DEFAULT_REFINE_CYCLES
    theta_step: float = 1.0
    radius: float | None = None
    d_min: float = 0.05
    d_max: float = 20.0
    out: str = "out"
    defaults_used: tuple[str, ...] = field(default=(), compare=False)

    def system(self) -> SystemDefinition:
        if self.preset is not None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                return build_system(self.preset, z=self.z)
        return build_system(particles=self.particles, groups=self.groups)

    def canonical_text(self) -> str:
        """Resolved settings, one per line; the output directory is excluded."""
        lines = []
        for f in fields(self):
            if f.name in ("out", "defaults_used"):
                continue
            value = getattr(self, f.name)
            if f.name == "particles":
                value = ";".join(f"{p.mass!r} {p.charge!r} {p.label}" for p in value)
            elif f.name == "groups":
                value = ";".join(",".join(str(i) for i in g) for g in value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()


def _convert(key, raw, line):
    kind = _SCALAR_KEYS[key]
    try:
        value = kind(raw)
    except ValueError:
        raise ConfigError(f"malformed value for {key}: {raw!r}", line) from None
    return value


def parse_config(text: str, **overrides) -> RunConfig:
    """Parse and validate a configuration; ``overrides`` replace parsed keys."""
    values: dict[str, object] = {}
    particles: list[Particle] = []
    groups: list[tuple[int, ...]] = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw_line.strip()!r}", lineno)
        key, raw = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if key == "particle":
            parts = raw.split()
            if len(parts) not in (2, 3):
                raise ConfigError("particle needs 'mass charge [label]'", lineno)
            try:
                particles.append(Particle(float(parts[0]), float(parts[1]), parts[2] if len(parts) == 3 else ""))
            except ValueError as exc:
                raise ConfigError(f"invalid particle: {exc}", lineno) from None
        elif key == "group":
            try:
                groups.append(tuple(int(i) for i in raw.split(",")))
            except ValueError:
                raise ConfigError(f"malformed group {raw!r}", lineno) from None
        elif key in _SCALAR_KEYS:
            if key in values:
                raise ConfigError(f"duplicate key {key}", lineno)
            values[key] = _convert(key, raw, lineno)
        else:
            raise ConfigError(f"unknown key {key!r}", lineno)

    for key, value in overrides.items():
        if value is not None:
            if key not in _SCALAR_KEYS:
                raise ConfigError(f"unknown override {key!r}")
            values[key] = value

    preset = values.get("preset")
    if preset is None and not particles:
        raise ConfigError("no system given: set 'preset' or list 'particle' lines")
    if preset is not None and particles:
        raise ConfigError("give either a preset or particle lines, not both")
    if preset is not None:
        values["preset"] = preset = str(preset).lower()
    if "z" in values and preset != "h2z":
        raise ConfigError("'z' only applies to preset h2z")

    try:
        if preset is not None:
            system = build_system(preset, z=values.get("z"))
        else:
            system = build_system(particles=particles, groups=groups)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    d_min, d_max = default_scale_range(system)
    defaults = {
        "seed": 1,
        "basis_target": default_basis_size(system),
        "trials": DEFAULT_TRIALS,
        "refine_cycles": DEFAULT_REFINE_CYCLES,
        "theta_step": 1.0,
        "d_min": d_min,
        "d_max": d_max,
        "out": "out",
    }
    used = tuple(sorted(k for k in defaults if k not in values))
    resolved = {**defaults, **values}

    seed = resolved["seed"]
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    for key in ("basis_target", "trials", "theta_step", "d_min", "d_max"):
        if not resolved[key] > 0:
            raise ConfigError(f"{key} must be positive")
    if resolved["refine_cycles"] < 0:
        raise ConfigError("refine_cycles must be non-negative")
    if resolved.get("radius") is not None and not resolved["radius"] > 0:
        raise ConfigError("radius must be positive")
    if not resolved["d_min"] < resolved["d_max"]:
        raise ConfigError("d_min must be below d_max")
    if 360.0 % resolved["theta_step"] > 1e-9:
        raise ConfigError("theta_step must divide 360")

    return RunConfig(
        preset=preset,
        z=values.get("z"),
        particles=tuple(particles),
        groups=tuple(groups),
        seed=int(seed),
        basis_target=int(resolved["basis_target"]),
        trials=int(resolved["trials"]),
        refine_cycles=int(resolved["refine_cycles"]),
        theta_step=float(resolved["theta_step"]),
        radius=resolved.get("radius"),
        d_min=float(resolved["d_min"]),
        d_max=float(resolved["d_max"]),
        out=str(resolved["out"]),
        defaults_used=used,
    )


def preset_config(preset: str, **settings) -> RunConfig:
    """Config for a preset with optional keyword settings."""
    lines = [f"preset = {preset}"] + [f"{k} = {v}" for k, v in settings.items() if v is not None]
    return parse_config("\n".join(lines))
