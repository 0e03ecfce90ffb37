"""Strict TOML run configuration.

Unknown sections or keys are errors; every numeric field is range-checked
before any computation starts.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from dataclasses import field as _field

import tomli
import tomli_w


class ConfigError(ValueError):
    pass


def _positive(section, name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ConfigError(f"{section}.{name} must be a positive finite number, got {value!r}")


def _finite(section, name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value)):
        raise ConfigError(f"{section}.{name} must be a finite number, got {value!r}")


def _int_at_least(section, name, value, lo):
    if isinstance(value, bool) or not isinstance(value, int) or value < lo:
        raise ConfigError(f"{section}.{name} must be an integer >= {lo}, got {value!r}")


@dataclass
class GridSection:
    N: int = 200

    def validate(self):
        _int_at_least("grid", "N", self.N, 2)


@dataclass
class MapSection:
    kind: str = "rational"
    r_max: float = 200.0
    L: float | None = None

    def validate(self):
        if self.kind not in ("rational", "linear"):
            raise ConfigError(f"map.kind must be 'rational' or 'linear', got {self.kind!r}")
        _positive("map", "r_max", self.r_max)
        if self.L is not None:
            if self.kind != "rational":
                raise ConfigError("map.L only applies to the rational map")
            _positive("map", "L", self.L)


@dataclass
class BasisSection:
    l_max: int = 0
    m_restriction: int | None = None

    def validate(self):
        _int_at_least("basis", "l_max", self.l_max, 0)
        if self.m_restriction is not None:
            if isinstance(self.m_restriction, bool) or not isinstance(self.m_restriction, int):
                raise ConfigError("basis.m_restriction must be an integer")
            if abs(self.m_restriction) > self.l_max:
                raise ConfigError("basis.m_restriction exceeds basis.l_max")


@dataclass
class PotentialSection:
    kind: str = "coulomb"
    Z: float = 1.0
    a: float | None = None

    def validate(self):
        if self.kind not in ("coulomb", "softcore", "zero"):
            raise ConfigError(f"potential.kind must be coulomb, softcore or zero, got {self.kind!r}")
        _finite("potential", "Z", self.Z)
        if self.kind == "softcore":
            if self.a is None:
                raise ConfigError("potential.a is required for the softcore potential")
            _positive("potential", "a", self.a)
        elif self.a is not None:
            raise ConfigError("potential.a only applies to the softcore potential")


@dataclass
class FieldSection:
    polarization: str = "z"
    A0: float = 0.0
    omega: float = 0.057
    duration: float = 220.4
    phase: float = 0.0

    def validate(self):
        if self.polarization not in ("x", "y", "z"):
            raise ConfigError(f"field.polarization must be x, y or z, got {self.polarization!r}")
        _finite("field", "A0", self.A0)
        _finite("field", "omega", self.omega)
        _positive("field", "duration", self.duration)
        _finite("field", "phase", self.phase)


@dataclass
class PropagationSection:
    dt: float = 0.05
    n_steps: int | None = None
    rtol: float = 1e-12
    atol: float = 0.0
    max_iter: int = 2000
    use_preconditioner: bool = True
    precond_variant: str = "kinetic"
    snapshot_stride: int = 0
    output_stride: int = 1

    def validate(self):
        _positive("propagation", "dt", self.dt)
        if self.n_steps is not None:
            _int_at_least("propagation", "n_steps", self.n_steps, 0)
        for name in ("rtol", "atol"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
                raise ConfigError(f"propagation.{name} must be a finite number >= 0, got {v!r}")
        if not (self.rtol > 0 or self.atol > 0):
            raise ConfigError("propagation needs rtol > 0 or atol > 0")
        _int_at_least("propagation", "max_iter", self.max_iter, 1)
        if not isinstance(self.use_preconditioner, bool):
            raise ConfigError("propagation.use_preconditioner must be true or false")
        if self.precond_variant not in ("kinetic", "full"):
            raise ConfigError("propagation.precond_variant must be 'kinetic' or 'full'")
        _int_at_least("propagation", "snapshot_stride", self.snapshot_stride, 0)
        _int_at_least("propagation", "output_stride", self.output_stride, 1)


@dataclass
class TiseSection:
    l: list = _field(default_factory=lambda: [0])
    count: int = 5
    write_states: bool = False

    def validate(self):
        if not isinstance(self.l, list) or not self.l:
            raise ConfigError("tise.l must be a non-empty list of integers")
        for v in self.l:
            _int_at_least("tise", "l", v, 0)
        _int_at_least("tise", "count", self.count, 1)
        if not isinstance(self.write_states, bool):
            raise ConfigError("tise.write_states must be true or false")


@dataclass
class InitialSection:
    n: int = 1
    l: int = 0
    m: int = 0

    def validate(self):
        _int_at_least("initial", "l", self.l, 0)
        _int_at_least("initial", "n", self.n, self.l + 1)
        if isinstance(self.m, bool) or not isinstance(self.m, int) or abs(self.m) > self.l:
            raise ConfigError(f"initial.m must satisfy |m| <= l, got {self.m!r}")


@dataclass
class OutputSection:
    directory: str = "out"
    formats: list = _field(default_factory=lambda: ["csv"])

    def validate(self):
        allowed = {"csv", "states", "snapshots"}
        if not isinstance(self.formats, list) or not set(self.formats) <= allowed:
            raise ConfigError(f"output.formats must be a list drawn from {sorted(allowed)}")


_SECTIONS = {
    "grid": GridSection,
    "map": MapSection,
    "basis": BasisSection,
    "potential": PotentialSection,
    "field": FieldSection,
    "propagation": PropagationSection,
    "tise": TiseSection,
    "initial": InitialSection,
    "output": OutputSection,
}


@dataclass
class RunConfig:
    grid: GridSection = _field(default_factory=GridSection)
    map: MapSection = _field(default_factory=MapSection)
    basis: BasisSection = _field(default_factory=BasisSection)
    potential: PotentialSection = _field(default_factory=PotentialSection)
    field: FieldSection = _field(default_factory=FieldSection)
    propagation: PropagationSection = _field(default_factory=PropagationSection)
    tise: TiseSection = _field(default_factory=TiseSection)
    initial: InitialSection = _field(default_factory=InitialSection)
    output: OutputSection = _field(default_factory=OutputSection)

    def validate(self):
        for name in _SECTIONS:
            getattr(self, name).validate()
        if self.basis.m_restriction is not None:
            if self.field.polarization != "z":
                raise ConfigError("basis.m_restriction requires field.polarization = 'z'")
            if self.initial.m != self.basis.m_restriction:
                raise ConfigError("initial.m must equal basis.m_restriction")
        if self.initial.l > self.basis.l_max:
            raise ConfigError("initial.l exceeds basis.l_max")
        return self

    @property
    def n_steps(self):
        p = self.propagation
        if p.n_steps is not None:
            return p.n_steps
        return int(math.ceil(self.field.duration / p.dt - 1e-9))

    def to_dict(self):
        """Nested plain dict with ``None`` entries dropped (TOML has no null)."""
        return {
            name: {k: v for k, v in asdict(getattr(self, name)).items() if v is not None}
            for name in _SECTIONS
        }

    def dumps(self):
        return tomli_w.dumps(self.to_dict())


def from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a table")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    sections = {}
    for name, cls in _SECTIONS.items():
        raw = data.get(name, {})
        if not isinstance(raw, dict):
            raise ConfigError(f"[{name}] must be a table")
        known = {f.name for f in fields(cls)}
        bad = set(raw) - known
        if bad:
            raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(bad))}")
        # TOML integers are fine wherever a float is expected
        sections[name] = cls(**raw)
    return RunConfig(**sections).validate()


def loads(text):
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    return from_dict(data)


def load(path):
    with open(path, "rb") as fh:
        try:
            data = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
    return from_dict(data)
