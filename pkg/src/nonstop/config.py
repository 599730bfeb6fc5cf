"""Scenario configuration: a strict JSON schema mapped onto library objects.

Every section is optional and falls back to the reference scenario (0.5 kg load,
700 N/m cables of 0.8 m, 1000-trial orbit sampler). Unknown keys anywhere are
rejected. All quantities are SI.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .geometry import AttachmentLayout, Wrench, gravity_wrench
from .orbit import EPS_SPEED, EPS_TENSION, LinearOrbit, sample_orbit_matrix
from .sim import CableParams, CarrierParams, SimWorld


class ConfigError(ValueError):
    pass


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object, got {type(d).__name__}")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(unknown)}")


def _section(cls, d, where):
    if d is None:
        return cls()
    _check_keys(d, [f.name for f in fields(cls)], where)
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _number(x, where, positive=False, nonneg=False):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {x!r}")
    x = float(x)
    if not np.isfinite(x) or (positive and x <= 0) or (nonneg and x < 0):
        raise ConfigError(f"{where}: invalid value {x!r}")
    return x


def _integer(x, where, minimum=None):
    if isinstance(x, bool) or not isinstance(x, int):
        raise ConfigError(f"{where}: expected an integer, got {x!r}")
    if minimum is not None and x < minimum:
        raise ConfigError(f"{where}: must be >= {minimum}")
    return x


_LAYOUT_FIELDS = {
    "points": None,
    "circle": ("n", "radius"),
    "perturbed_circle": ("n", "radius", "angle_jitter", "z_jitter", "angle_gain", "seed"),
}


@dataclass
class LayoutSpec:
    kind: str = "perturbed_circle"
    params: dict = field(default_factory=lambda: {"n": 5, "radius": 1.2, "angle_jitter": 0.2,
                                                 "z_jitter": 1.0, "angle_gain": 0.2, "seed": 1})

    @classmethod
    def from_dict(cls, d):
        if d is None:
            return cls()
        if not isinstance(d, dict) or len(d) != 1:
            raise ConfigError("layout: expected exactly one of " + ", ".join(_LAYOUT_FIELDS))
        (kind, params), = d.items()
        if kind not in _LAYOUT_FIELDS:
            raise ConfigError(f"layout: unknown generator {kind!r}")
        if kind == "points":
            pts = np.asarray(params, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 3:
                raise ConfigError("layout.points: expected a list of 3-vectors")
            return cls(kind, {"points": pts.tolist()})
        _check_keys(params, _LAYOUT_FIELDS[kind], f"layout.{kind}")
        if "n" not in params:
            raise ConfigError(f"layout.{kind}: missing n")
        out = {"n": _integer(params["n"], f"layout.{kind}.n", 3),
               "radius": _number(params.get("radius", 1.2), f"layout.{kind}.radius", positive=True)}
        if kind == "perturbed_circle":
            out["angle_jitter"] = _number(params.get("angle_jitter", 0.2), "layout.perturbed_circle.angle_jitter", nonneg=True)
            out["z_jitter"] = _number(params.get("z_jitter", 1.0), "layout.perturbed_circle.z_jitter", nonneg=True)
            out["angle_gain"] = _number(params.get("angle_gain", 0.2), "layout.perturbed_circle.angle_gain")
            out["seed"] = _integer(params.get("seed", 0), "layout.perturbed_circle.seed", 0)
        return cls(kind, out)

    def to_dict(self):
        if self.kind == "points":
            return {"points": self.params["points"]}
        return {self.kind: dict(self.params)}

    def build(self) -> AttachmentLayout:
        if self.kind == "points":
            return AttachmentLayout(np.asarray(self.params["points"], dtype=float))
        if self.kind == "circle":
            return AttachmentLayout.circle(self.params["n"], self.params["radius"])
        return AttachmentLayout.perturbed_circle(**self.params)


@dataclass
class LoadSpec:
    mass: float = 0.5
    inertia: object = 0.01

    def __post_init__(self):
        self.mass = _number(self.mass, "load.mass", positive=True)
        a = np.asarray(self.inertia, dtype=float)
        if a.shape not in ((), (3,), (3, 3)) or not np.all(np.isfinite(a)):
            raise ConfigError("load.inertia: expected a scalar, a diagonal 3-vector or a 3x3 matrix")
        self.inertia = a.tolist()


@dataclass
class WrenchSpec:
    kind: str = "gravity"
    direction: list = field(default_factory=lambda: [0.0, 0.0, -1.0])
    force: Optional[list] = None
    torque: Optional[list] = None

    @classmethod
    def from_dict(cls, d):
        if d is None:
            return cls()
        if not isinstance(d, dict) or len(d) != 1:
            raise ConfigError("wrench: expected exactly one of gravity, explicit")
        (kind, params), = d.items()
        if kind == "gravity":
            _check_keys(params, ("direction",), "wrench.gravity")
            direction = [float(x) for x in params.get("direction", [0.0, 0.0, -1.0])]
            if len(direction) != 3:
                raise ConfigError("wrench.gravity.direction: expected a 3-vector")
            return cls("gravity", direction)
        if kind == "explicit":
            _check_keys(params, ("force", "torque"), "wrench.explicit")
            force = [float(x) for x in params.get("force", [0.0, 0.0, 0.0])]
            torque = [float(x) for x in params.get("torque", [0.0, 0.0, 0.0])]
            if len(force) != 3 or len(torque) != 3:
                raise ConfigError("wrench.explicit: force and torque must be 3-vectors")
            return cls("explicit", None, force, torque)
        raise ConfigError(f"wrench: unknown kind {kind!r}")

    def to_dict(self):
        if self.kind == "gravity":
            return {"gravity": {"direction": list(self.direction)}}
        return {"explicit": {"force": list(self.force), "torque": list(self.torque)}}

    def build(self, mass: float) -> Wrench:
        if self.kind == "gravity":
            try:
                return gravity_wrench(mass, self.direction)
            except ValueError as exc:
                raise ConfigError(f"wrench.gravity: {exc}") from exc
        return Wrench(self.force, self.torque)


@dataclass
class CableSpec:
    stiffness: float = 700.0
    damping: float = 1.0
    rest_length: float = 0.8

    def __post_init__(self):
        self.stiffness = _number(self.stiffness, "cable.stiffness", positive=True)
        self.damping = _number(self.damping, "cable.damping", nonneg=True)
        self.rest_length = _number(self.rest_length, "cable.rest_length", positive=True)

    def build(self) -> CableParams:
        return CableParams(self.stiffness, self.damping, self.rest_length)


def _gain(v, where):
    a = np.asarray(v, dtype=float)
    if a.shape not in ((), (3,), (3, 3)) or not np.all(np.isfinite(a)):
        raise ConfigError(f"{where}: expected a scalar, a diagonal 3-vector or a 3x3 matrix")
    return a.tolist()


@dataclass
class CarrierSpec:
    inertia: object = 0.01
    K1: object = 500.0
    K2: object = 10.0
    K3: object = 20.0
    gain_order: str = "units"

    def __post_init__(self):
        for name in ("inertia", "K1", "K2", "K3"):
            setattr(self, name, _gain(getattr(self, name), f"carrier.{name}"))
        if self.gain_order not in ("units", "verbatim"):
            raise ConfigError("carrier.gain_order: expected 'units' or 'verbatim'")

    def build(self) -> CarrierParams:
        return CarrierParams(self.inertia, self.K1, self.K2, self.K3, self.gain_order)


@dataclass
class SamplerSpec:
    trials: int = 1000
    seed: int = 0

    def __post_init__(self):
        _integer(self.trials, "orbit.sampler.trials", 1)
        _integer(self.seed, "orbit.sampler.seed", 0)


@dataclass
class OrbitSpec:
    A: Optional[list] = None
    sampler: SamplerSpec = field(default_factory=SamplerSpec)
    max_attempts: int = 1
    omega: float = 1.0
    amplitude: float = 1.0

    @classmethod
    def from_dict(cls, d):
        if d is None:
            return cls()
        _check_keys(d, ("A", "sampler", "max_attempts", "omega", "amplitude"), "orbit")
        A = d.get("A")
        if A is not None:
            A = np.asarray(A, dtype=float)
            if A.ndim != 2 or A.shape[1] != 2:
                raise ConfigError("orbit.A: expected a k x 2 matrix")
            A = A.tolist()
        return cls(
            A=A,
            sampler=_section(SamplerSpec, d.get("sampler"), "orbit.sampler"),
            max_attempts=_integer(d.get("max_attempts", 1), "orbit.max_attempts", 1),
            omega=_number(d.get("omega", 1.0), "orbit.omega", positive=True),
            amplitude=_number(d.get("amplitude", 1.0), "orbit.amplitude", positive=True),
        )

    def to_dict(self):
        d = {"sampler": asdict(self.sampler), "max_attempts": self.max_attempts,
             "omega": self.omega, "amplitude": self.amplitude}
        if self.A is not None:
            d["A"] = self.A
        return d

    def candidates(self, gm, w):
        """Yield ``(seed, orbit)`` for each attempt; a fixed A yields once."""
        if self.A is not None:
            A = np.asarray(self.A, dtype=float)
            if A.shape[0] != gm.k:
                raise ConfigError(f"orbit.A: expected {gm.k} rows, got {A.shape[0]}")
            yield None, LinearOrbit(A, self.omega, self.amplitude)
            return
        for attempt in range(self.max_attempts):
            seed = self.sampler.seed + attempt
            A = sample_orbit_matrix(gm, w, self.sampler.trials, seed).A
            yield seed, LinearOrbit(A, self.omega, self.amplitude)


@dataclass
class VerifySpec:
    samples: int = 4096
    eps_tension: float = EPS_TENSION
    eps_speed: float = EPS_SPEED

    def __post_init__(self):
        _integer(self.samples, "verify.samples", 64)
        self.eps_tension = _number(self.eps_tension, "verify.eps_tension", nonneg=True)
        self.eps_speed = _number(self.eps_speed, "verify.eps_speed", nonneg=True)


@dataclass
class SimSpec:
    dt: float = 1e-3
    duration: float = 20.0
    record_every: int = 10

    def __post_init__(self):
        self.dt = _number(self.dt, "sim.dt", positive=True)
        self.duration = _number(self.duration, "sim.duration", nonneg=True)
        _integer(self.record_every, "sim.record_every", 1)


@dataclass
class PlanSpec:
    min_clearance: float = 1e-3
    seed: int = 0
    max_retries: int = 64

    def __post_init__(self):
        self.min_clearance = _number(self.min_clearance, "plan.min_clearance", nonneg=True)
        _integer(self.seed, "plan.seed", 0)
        _integer(self.max_retries, "plan.max_retries", 1)


_TOP = ("layout", "load", "wrench", "cable", "carrier", "orbit", "verify", "sim", "plan")


@dataclass
class ScenarioConfig:
    layout: LayoutSpec = field(default_factory=LayoutSpec)
    load: LoadSpec = field(default_factory=LoadSpec)
    wrench: WrenchSpec = field(default_factory=WrenchSpec)
    cable: CableSpec = field(default_factory=CableSpec)
    carrier: CarrierSpec = field(default_factory=CarrierSpec)
    orbit: OrbitSpec = field(default_factory=OrbitSpec)
    verify: VerifySpec = field(default_factory=VerifySpec)
    sim: SimSpec = field(default_factory=SimSpec)
    plan: PlanSpec = field(default_factory=PlanSpec)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        _check_keys(d, _TOP, "config")
        return cls(
            layout=LayoutSpec.from_dict(d.get("layout")),
            load=_section(LoadSpec, d.get("load"), "load"),
            wrench=WrenchSpec.from_dict(d.get("wrench")),
            cable=_section(CableSpec, d.get("cable"), "cable"),
            carrier=_section(CarrierSpec, d.get("carrier"), "carrier"),
            orbit=OrbitSpec.from_dict(d.get("orbit")),
            verify=_section(VerifySpec, d.get("verify"), "verify"),
            sim=_section(SimSpec, d.get("sim"), "sim"),
            plan=_section(PlanSpec, d.get("plan"), "plan"),
        )

    def to_dict(self) -> dict:
        return {
            "layout": self.layout.to_dict(),
            "load": asdict(self.load),
            "wrench": self.wrench.to_dict(),
            "cable": asdict(self.cable),
            "carrier": asdict(self.carrier),
            "orbit": self.orbit.to_dict(),
            "verify": asdict(self.verify),
            "sim": asdict(self.sim),
            "plan": asdict(self.plan),
        }

    @classmethod
    def load_file(cls, path) -> "ScenarioConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)

    def build_wrench(self) -> Wrench:
        return self.wrench.build(self.load.mass)

    def build_world(self, layout: AttachmentLayout) -> SimWorld:
        return SimWorld(
            layout,
            load_mass=self.load.mass,
            load_inertia=self.load.inertia,
            cables=self.cable.build(),
            carriers=self.carrier.build(),
            dt=self.sim.dt,
            duration=self.sim.duration,
        )
