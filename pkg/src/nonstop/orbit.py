"""Linear periodic orbits ``lam(t) = A mu(t)`` through the admissible manifold."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geometry import (
    RANK_RTOL,
    GraspModel,
    LambdaPoint,
    Wrench,
    ZeroForce,
    ZERO_FORCE_TOL,
)

EPS_TENSION = 1e-3
EPS_SPEED = 1e-4
IMAGE_RTOL = 1e-8
MIN_SAMPLES = 64
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class LinearOrbit:
    """``lam(t) = amplitude * A @ (cos wt, sin wt)`` with ``A`` of shape ``(k, 2)``."""

    A: np.ndarray
    omega: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[1] != 2:
            raise ValueError(f"A must have shape (k, 2), got {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValueError("A must be finite")
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def period(self) -> float:
        return TWO_PI / self.omega

    @property
    def scaled_A(self) -> np.ndarray:
        return self.amplitude * self.A


def condition_numbers(As: np.ndarray) -> np.ndarray:
    s = np.linalg.svd(As, compute_uv=False)
    with np.errstate(divide="ignore"):
        return s[..., 0] / s[..., -1]


def orbit_rng(seed: int) -> np.random.Generator:
    """The generator used for every orbit draw: numpy's PCG64 seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(seed))


def draw_orbit_matrices(k: int, trials: int, seed: int) -> np.ndarray:
    """All ``trials`` candidate matrices, ``(trials, k, 2)``, entries ``U[0, 1)``."""
    return orbit_rng(seed).random((trials, k, 2))


def sample_orbit_matrix(gm: GraspModel, w: Wrench, trials: int = 1000, seed: int = 0) -> LinearOrbit:
    """Best-conditioned of ``trials`` random ``k x 2`` matrices.

    Condition numbers are 2-norm (ratio of singular values); the first
    minimizer wins ties. ``w`` does not enter the draw.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    As = draw_orbit_matrices(gm.k, trials, seed)
    best = int(np.argmin(condition_numbers(As)))
    return LinearOrbit(As[best])


def eval_orbit(orbit: LinearOrbit, t: float):
    """``(lam, lam_dot)`` at time ``t``; the phase is reduced mod 2 pi first."""
    ph = np.mod(orbit.omega * t, TWO_PI)
    mu = np.array([np.cos(ph), np.sin(ph)])
    mudot = orbit.omega * np.array([-np.sin(ph), np.cos(ph)])
    A = orbit.scaled_A
    return LambdaPoint(A @ mu), A @ mudot


@dataclass(frozen=True)
class OrbitReport:
    valid: bool
    min_tension: float
    min_tension_time: float
    min_tension_carrier: int
    min_carrier_speed: float
    min_speed_time: float
    min_speed_carrier: int
    rank_checks: tuple
    image_residuals: tuple
    image_thresholds: tuple
    samples: int
    eps_tension: float
    eps_speed: float
    analytic_ok: bool = field(default=False)
    sampled_ok: bool = field(default=False)

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "analytic_ok": self.analytic_ok,
            "sampled_ok": self.sampled_ok,
            "min_tension": self.min_tension,
            "min_tension_time": self.min_tension_time,
            "min_tension_carrier": self.min_tension_carrier,
            "min_carrier_speed": self.min_carrier_speed,
            "min_speed_time": self.min_speed_time,
            "min_speed_carrier": self.min_speed_carrier,
            "rank_checks": list(self.rank_checks),
            "image_residuals": list(self.image_residuals),
            "image_thresholds": list(self.image_thresholds),
            "samples": self.samples,
            "eps_tension": self.eps_tension,
            "eps_speed": self.eps_speed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OrbitReport":
        d = dict(d)
        for key in ("rank_checks", "image_residuals", "image_thresholds"):
            d[key] = tuple(d[key])
        return cls(**d)


def orbit_blocks(gm: GraspModel, w: Wrench, orbit: LinearOrbit):
    """Per-carrier offsets ``P_i G^+ w`` ``(n, 3)`` and blocks ``P_i N A`` ``(n, 3, 2)``."""
    c = gm.base_forces(w)
    B = np.einsum("nik,kj->nij", gm.carrier_nullspace(), orbit.scaled_A)
    return c, B


def analytic_checks(c: np.ndarray, B: np.ndarray):
    """Rank of each ``P_i N A`` and the distance of ``P_i G^+ w`` from its image."""
    ranks, residuals, thresholds = [], [], []
    for ci, Bi in zip(c, B):
        U, s, _ = np.linalg.svd(Bi, full_matrices=True)
        r = int(np.sum(s > RANK_RTOL * s[0])) if s[0] > 0 else 0
        Ur = U[:, :r]
        resid = ci - Ur @ (Ur.T @ ci)
        ranks.append(r)
        residuals.append(float(np.linalg.norm(resid)))
        thresholds.append(IMAGE_RTOL * float(np.linalg.norm(ci)))
    return ranks, residuals, thresholds


def sample_times(orbit: LinearOrbit, samples: int) -> np.ndarray:
    return np.arange(samples) * (orbit.period / samples)


def verify_orbit(
    gm: GraspModel,
    w: Wrench,
    orbit: LinearOrbit,
    samples: int = 4096,
    eps_T: float = EPS_TENSION,
    eps_v: float = EPS_SPEED,
    lengths=None,
) -> OrbitReport:
    """Certify that the orbit keeps every cable taut and every carrier moving.

    Analytic part: every ``P_i N A`` must have rank 2 and ``P_i G^+ w`` must
    lie strictly outside its image. A carrier whose ``P_i G^+ w`` is exactly
    zero passes on rank alone. Sampled part: minimum tension and carrier speed
    over ``samples`` uniform times in one period, with speeds
    ``|Dq_i lam_dot| * l_i`` (``lengths`` default to 1 m).
    """
    if samples < MIN_SAMPLES:
        raise ValueError(f"samples must be >= {MIN_SAMPLES}")
    if lengths is None:
        lengths = np.ones(gm.n)
    lengths = np.broadcast_to(np.asarray(lengths, dtype=float), (gm.n,))
    c, B = orbit_blocks(gm, w, orbit)
    ranks, residuals, thresholds = analytic_checks(c, B)
    analytic_ok = all(r == 2 for r in ranks) and all(
        res > thr or not np.any(ci) for res, thr, ci in zip(residuals, thresholds, c)
    )

    times = sample_times(orbit, samples)
    T, speed = _kernels.orbit_samples(c, B, orbit.omega, lengths, times)
    jt, it = np.unravel_index(np.argmin(T), T.shape)
    js, is_ = np.unravel_index(np.argmin(speed), speed.shape)
    min_T = float(T[jt, it])
    min_v = float(speed[js, is_])
    sampled_ok = min_T > eps_T and min_v > eps_v
    return OrbitReport(
        valid=bool(analytic_ok and sampled_ok),
        min_tension=min_T,
        min_tension_time=float(times[jt]),
        min_tension_carrier=int(it),
        min_carrier_speed=min_v,
        min_speed_time=float(times[js]),
        min_speed_carrier=int(is_),
        rank_checks=tuple(ranks),
        image_residuals=tuple(residuals),
        image_thresholds=tuple(thresholds),
        samples=int(samples),
        eps_tension=float(eps_T),
        eps_speed=float(eps_v),
        analytic_ok=bool(analytic_ok),
        sampled_ok=bool(sampled_ok),
    )


@dataclass(frozen=True)
class CarrierKinematics:
    """Per-carrier position, velocity, bearing and tension in the load frame."""

    p: np.ndarray
    v: np.ndarray
    q: np.ndarray
    T: np.ndarray


def orbit_to_kinematics(gm: GraspModel, w: Wrench, orbit: LinearOrbit, lengths, t) -> CarrierKinematics:
    """Carrier states ``p_i = b_i + q_i l_i`` and ``v_i = Dq_i lam_dot l_i``.

    ``t`` may be a scalar or an array of times; array input adds a leading
    time axis to every field.
    """
    lengths = np.broadcast_to(np.asarray(lengths, dtype=float), (gm.n,))
    if np.any(lengths <= 0):
        raise ValueError("cable lengths must be positive")
    scalar = np.ndim(t) == 0
    times = np.atleast_1d(np.asarray(t, dtype=float))
    ph = np.mod(orbit.omega * times, TWO_PI)
    mu = np.stack([np.cos(ph), np.sin(ph)], axis=1)
    mudot = orbit.omega * np.stack([-np.sin(ph), np.cos(ph)], axis=1)
    c, B = orbit_blocks(gm, w, orbit)
    f = c[None] + np.einsum("nij,mj->mni", B, mu)
    fdot = np.einsum("nij,mj->mni", B, mudot)
    T = np.linalg.norm(f, axis=2)
    if np.any(T <= ZERO_FORCE_TOL):
        jm, im = np.unravel_index(np.argmin(T), T.shape)
        raise ZeroForce(f"carrier {im} loses tension at t={times[jm]:.6g}")
    q = f / T[..., None]
    qdot = (fdot - np.sum(fdot * q, axis=2)[..., None] * q) / T[..., None]
    p = gm.layout.b[None] + q * lengths[None, :, None]
    v = qdot * lengths[None, :, None]
    if scalar:
        return CarrierKinematics(p[0], v[0], q[0], T[0])
    return CarrierKinematics(p, v, q, T)
