"""Rigid-body load on spring-damper cables, pulled by PID-tracking point carriers.

The load is a rigid body with frame {O} at its centre of mass, integrated in the
world frame {W} (z up). Carriers are gravity-compensated point masses whose
controller treats the cable pull as an unmodelled disturbance. Everything is
advanced together with fixed-step RK4; see ``_kernels`` for the state layout.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .geometry import GRAVITY, AttachmentLayout, GraspModel, Wrench
from .orbit import LinearOrbit, orbit_to_kinematics


class NumericalDivergence(RuntimeError):
    """A state component left the finite range the integrator guards."""


@dataclass(frozen=True)
class CableParams:
    Kc: float = 700.0
    Bc: float = 1.0
    l0: float = 0.8

    def __post_init__(self):
        if not self.Kc > 0:
            raise ValueError("cable stiffness must be positive")
        if not self.Bc >= 0:
            raise ValueError("cable damping must be non-negative")
        if not self.l0 > 0:
            raise ValueError("cable rest length must be positive")


def _mat3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.ndim == 0:
        return float(a) * np.eye(3)
    if a.shape == (3,):
        return np.diag(a)
    return a.reshape(3, 3).copy()


@dataclass(frozen=True)
class CarrierParams:
    """Carrier inertia and controller gains.

    The controller is ``M p_dd = -f + K1 e_d + K2 e + K3 int(e)`` with
    ``e = p_des - p``. With ``gain_order="units"`` (the default) the gains are
    assigned by their units instead: ``K1`` (kg/s^2) multiplies ``e`` and
    ``K2`` (kg/s) multiplies ``e_d``. ``"verbatim"`` keeps the literal product
    order, whose ``K1 / M = 5e4 1/s`` velocity pole needs ``dt < 5e-5`` s for RK4.
    """

    Mi: np.ndarray = field(default_factory=lambda: 0.01 * np.eye(3))
    K1: np.ndarray = field(default_factory=lambda: 500.0 * np.eye(3))
    K2: np.ndarray = field(default_factory=lambda: 10.0 * np.eye(3))
    K3: np.ndarray = field(default_factory=lambda: 20.0 * np.eye(3))
    gain_order: str = "units"

    def __post_init__(self):
        for name in ("Mi", "K1", "K2", "K3"):
            object.__setattr__(self, name, _mat3(getattr(self, name)))
        if self.gain_order not in ("units", "verbatim"):
            raise ValueError(f"unknown gain_order {self.gain_order!r}")
        if np.any(np.linalg.eigvalsh(0.5 * (self.Mi + self.Mi.T)) <= 0):
            raise ValueError("carrier inertia must be positive definite")

    def pid(self):
        """``(Kd, Kp, Ki)``: gains on velocity error, position error, integral."""
        if self.gain_order == "units":
            return self.K2, self.K1, self.K3
        return self.K1, self.K2, self.K3


@dataclass(frozen=True)
class LoadState:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    quaternion: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("position", "quaternion", "velocity", "omega"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        q = self.quaternion
        object.__setattr__(self, "quaternion", q / np.linalg.norm(q))

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_rot(self.quaternion)

    @property
    def euler(self) -> np.ndarray:
        return rot_to_euler_zyx(self.rotation)


def quat_to_rot(q) -> np.ndarray:
    return _kernels._quat_to_rot_numpy(np.asarray(q, dtype=float))


def rot_to_euler_zyx(R) -> np.ndarray:
    """Roll, pitch, yaw with ``R = Rz(yaw) Ry(pitch) Rx(roll)``."""
    R = np.asarray(R)
    roll = np.arctan2(R[..., 2, 1], R[..., 2, 2])
    pitch = -np.arcsin(np.clip(R[..., 2, 0], -1.0, 1.0))
    yaw = np.arctan2(R[..., 1, 0], R[..., 0, 0])
    return np.stack([roll, pitch, yaw], axis=-1)


@dataclass(frozen=True)
class SimWorld:
    """Complete simulator state and parameters.

    ``active`` disconnects cables (False means the cable exerts nothing) and
    ``pinned`` holds carriers fixed in place; both default to all False/True
    as appropriate for the nominal system.
    """

    layout: AttachmentLayout
    load_mass: float = 0.5
    load_inertia: np.ndarray = field(default_factory=lambda: 0.01 * np.eye(3))
    cables: CableParams = field(default_factory=CableParams)
    carriers: CarrierParams = field(default_factory=CarrierParams)
    load: LoadState = field(default_factory=LoadState)
    carrier_pos: np.ndarray = None
    carrier_vel: np.ndarray = None
    err_int: np.ndarray = None
    gravity: float = GRAVITY
    dt: float = 1e-3
    duration: float = 20.0
    t: float = 0.0
    active: np.ndarray = None
    pinned: np.ndarray = None

    def __post_init__(self):
        n = self.layout.n
        object.__setattr__(self, "load_inertia", _mat3(self.load_inertia))
        for name, default in (("carrier_pos", 0.0), ("carrier_vel", 0.0), ("err_int", 0.0)):
            v = getattr(self, name)
            v = np.full((n, 3), default) if v is None else np.array(v, dtype=float).reshape(n, 3)
            object.__setattr__(self, name, v)
        for name, default in (("active", True), ("pinned", False)):
            v = getattr(self, name)
            v = np.full(n, default) if v is None else np.array(v, dtype=bool).reshape(n)
            object.__setattr__(self, name, v)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.load_mass > 0:
            raise ValueError("load mass must be positive")
        if np.any(np.linalg.eigvalsh(0.5 * (self.load_inertia + self.load_inertia.T)) <= 0):
            raise ValueError("load inertia must be positive definite")

    @property
    def n(self) -> int:
        return self.layout.n

    def state_vector(self) -> np.ndarray:
        L = self.load
        return np.concatenate([
            L.position, L.velocity, L.quaternion, L.omega,
            self.carrier_pos.ravel(), self.carrier_vel.ravel(), self.err_int.ravel(),
        ])

    def with_state(self, y, t) -> "SimWorld":
        n = self.n
        load = LoadState(position=y[0:3], velocity=y[3:6], quaternion=y[6:10], omega=y[10:13])
        return replace(
            self,
            load=load,
            carrier_pos=y[13 : 13 + 3 * n].reshape(n, 3),
            carrier_vel=y[13 + 3 * n : 13 + 6 * n].reshape(n, 3),
            err_int=y[13 + 6 * n :].reshape(n, 3),
            t=float(t),
        )

    def kernel_params(self) -> dict:
        Kd, Kp, Ki = self.carriers.pid()
        return {
            "b": np.ascontiguousarray(self.layout.b, dtype=float),
            "mass": float(self.load_mass),
            "g": float(self.gravity),
            "inertia": self.load_inertia,
            "inertia_inv": np.linalg.inv(self.load_inertia),
            "Kc": float(self.cables.Kc),
            "Bc": float(self.cables.Bc),
            "l0": float(self.cables.l0),
            "Minv": np.linalg.inv(self.carriers.Mi),
            "Kd": Kd,
            "Kp": Kp,
            "Ki": Ki,
            "active": self.active.astype(float),
            "pinned": self.pinned.astype(float),
        }


def cable_force(attach_world, carrier_pos, attach_vel, carrier_vel, cp: CableParams) -> np.ndarray:
    """Force the cable exerts on the load at its attachment point.

    The cable only pulls: a slack cable (length at or below rest) exerts
    nothing, and damping cannot make the tension negative. The carrier feels
    the opposite force.
    """
    d = np.asarray(carrier_pos, dtype=float) - np.asarray(attach_world, dtype=float)
    L = float(np.linalg.norm(d))
    if L < _kernels.SLACK_LENGTH:
        return np.zeros(3)
    u = d / L
    s = L - cp.l0
    if s <= 0.0:
        return np.zeros(3)
    sdot = float(u @ (np.asarray(carrier_vel, dtype=float) - np.asarray(attach_vel, dtype=float)))
    return max(0.0, cp.Kc * s + cp.Bc * sdot) * u


def _desired_grid(desired, n):
    p = np.asarray(desired[0], dtype=float)
    v = np.asarray(desired[1], dtype=float)
    if p.shape == (n, 3):
        p = np.broadcast_to(p, (3, n, 3))
        v = np.broadcast_to(v, (3, n, 3))
    if p.shape != (3, n, 3) or v.shape != (3, n, 3):
        raise ValueError("desired states must have shape (n, 3) or (3, n, 3)")
    return p, v


def _raise_divergence(world: SimWorld, k: int, t0: float):
    raise NumericalDivergence(f"state exceeded {_kernels.DIVERGENCE_LIMIT:g} at t={t0 + (k + 1) * world.dt:.6g} s")


def step(world: SimWorld, desired) -> SimWorld:
    """Advance ``world`` by one RK4 step of ``world.dt``.

    ``desired`` is ``(p_d, v_d)``: either ``(n, 3)`` arrays held over the step
    or ``(3, n, 3)`` arrays sampled at the start, midpoint and end of it.
    """
    p, v = _desired_grid(desired, world.n)
    states, _, status = _kernels.integrate(world.state_vector(), p, v, world.dt, 1, 1, world.kernel_params())
    if status >= 0:
        _raise_divergence(world, status, world.t)
    return world.with_state(states[-1], world.t + world.dt)


@dataclass
class TimeSeries:
    t: np.ndarray
    load_pos: np.ndarray
    load_quat: np.ndarray
    euler: np.ndarray
    carrier_pos: np.ndarray
    carrier_vel: np.ndarray
    tension: np.ndarray
    tracking_err: np.ndarray
    desired_pos: np.ndarray
    attach_normal: np.ndarray
    attach_offset: float

    @property
    def n(self) -> int:
        return self.carrier_pos.shape[1]

    def carrier_speed(self) -> np.ndarray:
        return np.linalg.norm(self.carrier_vel, axis=2)

    def carrier_offsets_load_frame(self) -> np.ndarray:
        """Signed distance of each carrier from the attachment plane, ``(m, n)``.

        Carrier positions are expressed in the actual (moving) load frame.
        """
        R = quat_to_rot(self.load_quat[0]) if len(self.t) == 1 else None
        Rs = np.stack([quat_to_rot(q) for q in self.load_quat]) if R is None else R[None]
        rel = self.carrier_pos - self.load_pos[:, None, :]
        local = np.einsum("mji,mnj->mni", Rs, rel)
        return local @ self.attach_normal - self.attach_offset

    def summary(self) -> dict:
        dev = np.linalg.norm(self.load_pos - self.load_pos[0], axis=1)
        att = np.abs(self.euler - self.euler[0]).max(axis=1)
        speed = self.carrier_speed()
        off = self.carrier_offsets_load_frame()
        crossing = (off.min(axis=0) < 0.0) & (off.max(axis=0) > 0.0)
        return {
            "samples": int(len(self.t)),
            "duration": float(self.t[-1] - self.t[0]),
            "max_load_position_deviation": float(dev.max()),
            "max_attitude_deviation": float(att.max()),
            "final_load_position": [float(x) for x in self.load_pos[-1]],
            "final_euler": [float(x) for x in self.euler[-1]],
            "min_tension": float(self.tension.min()),
            "min_carrier_speed": float(speed.min()),
            "max_tracking_error": float(np.linalg.norm(self.tracking_err, axis=2).max()),
            "plane_crossing": [bool(x) for x in crossing],
        }


def attachment_plane(b) -> tuple:
    """Least-squares plane through the attachment points: unit normal and offset.

    The normal is oriented with a non-negative z component.
    """
    b = np.asarray(b, dtype=float)
    centroid = b.mean(axis=0)
    _, _, Vt = np.linalg.svd(b - centroid)
    normal = Vt[-1]
    if normal[2] < 0 or (normal[2] == 0 and normal[np.argmax(np.abs(normal))] < 0):
        normal = -normal
    return normal, float(normal @ centroid)


def desired_trajectory(gm: GraspModel, w: Wrench, orbit: LinearOrbit, world: SimWorld, times) -> tuple:
    """Carrier targets in {W}, planned with rest-length cables and the load frozen
    at its pose in ``world``."""
    kin = orbit_to_kinematics(gm, w, orbit, world.cables.l0, times)
    R0 = world.load.rotation
    p = kin.p @ R0.T + world.load.position
    v = kin.v @ R0.T
    return p, v


def initial_world(gm: GraspModel, w: Wrench, orbit: LinearOrbit, world: SimWorld) -> SimWorld:
    """Place carriers on their planned trajectory at ``world.t`` with zero error."""
    p, v = desired_trajectory(gm, w, orbit, world, np.array([world.t]))
    return replace(world, carrier_pos=p[0], carrier_vel=v[0], err_int=np.zeros((world.n, 3)))


def run_scenario(gm: GraspModel, w: Wrench, orbit: LinearOrbit, world: SimWorld, record_every: int = 1,
                 place_carriers: bool = True) -> TimeSeries:
    """Track the orbit for ``world.duration`` seconds.

    Carriers start on the planned trajectory unless ``place_carriers`` is
    False. Samples are kept every ``record_every`` steps.
    """
    if place_carriers:
        world = initial_world(gm, w, orbit, world)
    steps = int(round(world.duration / world.dt))
    if steps < 0:
        raise ValueError("duration must be non-negative")
    record_every = max(1, int(record_every))
    half = world.t + 0.5 * world.dt * np.arange(2 * steps + 1)
    p_d, v_d = desired_trajectory(gm, w, orbit, world, half)
    y0 = world.state_vector()
    states, tensions, status = _kernels.integrate(y0, p_d, v_d, world.dt, steps, record_every,
                                                  world.kernel_params())
    if status >= 0:
        _raise_divergence(world, status, world.t)
    n = world.n
    idx = np.arange(states.shape[0]) * record_every
    t = world.t + idx * world.dt
    quat = states[:, 6:10]
    Rs = np.stack([quat_to_rot(q) for q in quat]) if len(quat) else np.zeros((0, 3, 3))
    pc = states[:, 13 : 13 + 3 * n].reshape(-1, n, 3)
    normal, offset = attachment_plane(world.layout.b)
    return TimeSeries(
        t=t,
        load_pos=states[:, 0:3],
        load_quat=quat,
        euler=rot_to_euler_zyx(Rs),
        carrier_pos=pc,
        carrier_vel=states[:, 13 + 3 * n : 13 + 6 * n].reshape(-1, n, 3),
        tension=tensions,
        tracking_err=p_d[2 * idx] - pc,
        desired_pos=p_d[2 * idx],
        attach_normal=normal,
        attach_offset=offset,
    )


def mechanical_energy(world: SimWorld) -> float:
    """Kinetic energy of load and carriers plus elastic cable energy, with
    gravitational potential of the load. Carrier gravity is compensated and
    contributes nothing."""
    L = world.load
    ke = 0.5 * world.load_mass * L.velocity @ L.velocity + 0.5 * L.omega @ world.load_inertia @ L.omega
    ke += 0.5 * np.einsum("ni,ij,nj->", world.carrier_vel, world.carriers.Mi, world.carrier_vel)
    R = L.rotation
    attach = L.position + world.layout.b @ R.T
    stretch = np.linalg.norm(world.carrier_pos - attach, axis=1) - world.cables.l0
    pe = 0.5 * world.cables.Kc * np.sum(np.where((stretch > 0) & world.active, stretch, 0.0) ** 2)
    pe += world.load_mass * world.gravity * L.position[2]
    return float(ke + pe)
