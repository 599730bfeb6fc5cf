"""Grasp model and pointwise maps on the manifold of admissible cable forces.

A configuration of ``n`` cable forces ``f = (f_1, ..., f_n)`` exerts the wrench
``w = G f`` on the load. Every force configuration realizing ``w`` is written
``f = G^+ w + N lam`` with ``N`` an orthonormal basis of ``ker G`` and ``lam``
a point of ``R^k``, ``k = 3n - 6``. The configuration is admissible when every
per-carrier block ``f_i`` is nonzero.

Carrier indices are zero-based throughout.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

GRAVITY = 9.81
RANK_RTOL = 1e-10
DEFAULT_EPS = 1e-6
ZERO_FORCE_TOL = 1e-12


class DegenerateLayout(ValueError):
    """The attachment points do not give a full-rank grasp matrix."""


class NotWrenchConsistent(ValueError):
    """A force configuration does not realize the requested wrench."""


class ZeroForce(ValueError):
    """A cable force vanishes, so its bearing is undefined."""


def skew(v) -> np.ndarray:
    """Cross-product matrix, ``skew(a) @ b == np.cross(a, b)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def numerical_rank(M, rtol: float = RANK_RTOL) -> int:
    s = np.linalg.svd(np.atleast_2d(M), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


@dataclass(frozen=True)
class AttachmentLayout:
    """Cable attachment points ``b_i`` on the load, in the load frame (m)."""

    b: np.ndarray

    def __post_init__(self):
        b = np.array(self.b, dtype=float)
        if b.ndim != 2 or b.shape[1] != 3:
            raise ValueError(f"attachment points must have shape (n, 3), got {b.shape}")
        if b.shape[0] < 3:
            raise ValueError(f"need at least 3 carriers, got {b.shape[0]}")
        if not np.all(np.isfinite(b)):
            raise ValueError("attachment points must be finite")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.b.shape[0]

    @classmethod
    def circle(cls, n: int, radius: float = 1.2) -> "AttachmentLayout":
        ang = 2.0 * np.pi * np.arange(1, n + 1) / n
        return cls(np.column_stack([radius * np.cos(ang), radius * np.sin(ang), np.zeros(n)]))

    @classmethod
    def perturbed_circle(
        cls,
        n: int,
        radius: float = 1.2,
        angle_jitter: float = 0.2,
        z_jitter: float = 1.0,
        angle_gain: float = 0.2,
        seed: int = 0,
    ) -> "AttachmentLayout":
        """Circle layout with per-carrier random angular offset and height.

        Carrier ``i`` (1-based) sits at angle ``2 pi i / n + angle_gain * r_i``
        with ``r_i ~ U[-angle_jitter, 0]`` and at height ``z_i ~ U[0, z_jitter]``.
        """
        rng = np.random.Generator(np.random.PCG64(seed))
        r = rng.uniform(-angle_jitter, 0.0, size=n)
        z = rng.uniform(0.0, z_jitter, size=n)
        ang = 2.0 * np.pi * np.arange(1, n + 1) / n + angle_gain * r
        return cls(np.column_stack([radius * np.cos(ang), radius * np.sin(ang), z]))


@dataclass(frozen=True)
class Wrench:
    force: np.ndarray
    torque: np.ndarray

    def __post_init__(self):
        for name in ("force", "torque"):
            v = np.array(getattr(self, name), dtype=float).reshape(3)
            if not np.all(np.isfinite(v)):
                raise ValueError(f"wrench {name} must be finite")
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])

    @classmethod
    def from_vector(cls, w) -> "Wrench":
        w = np.asarray(w, dtype=float).reshape(6)
        return cls(w[:3], w[3:])


def gravity_wrench(mass: float, eta=(0.0, 0.0, -1.0), g: float = GRAVITY) -> Wrench:
    """Wrench the cables must apply to hold a load of ``mass`` still.

    ``eta`` is the unit direction of gravity in the load frame. Gravity acts at
    the centre of mass, which is the load-frame origin, so the torque is zero.
    """
    eta = np.asarray(eta, dtype=float).reshape(3)
    if not mass > 0:
        raise ValueError(f"mass must be positive, got {mass}")
    if abs(np.linalg.norm(eta) - 1.0) > 1e-9:
        raise ValueError(f"gravity direction must be a unit vector, got norm {np.linalg.norm(eta)}")
    return Wrench(-mass * g * eta, np.zeros(3))


def grasp_matrix(b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    G = np.zeros((6, 3 * n))
    for i in range(n):
        G[:3, 3 * i : 3 * i + 3] = np.eye(3)
        G[3:, 3 * i : 3 * i + 3] = skew(b[i])
    return G


def _canonical_signs(V: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of every column made positive (first index on ties)
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


@dataclass(frozen=True)
class GraspModel:
    layout: AttachmentLayout
    G: np.ndarray
    Gdag: np.ndarray
    N: np.ndarray

    @property
    def n(self) -> int:
        return self.layout.n

    @property
    def k(self) -> int:
        return self.N.shape[1]

    def block(self, M: np.ndarray, i: int) -> np.ndarray:
        """Rows of ``M`` belonging to carrier ``i`` (the action of ``P_i``)."""
        return M[3 * i : 3 * i + 3]

    def carrier_nullspace(self) -> np.ndarray:
        """All ``P_i N`` blocks stacked as an ``(n, 3, k)`` array."""
        return self.N.reshape(self.n, 3, self.k)

    def base_forces(self, w: Wrench) -> np.ndarray:
        """Minimum-norm per-carrier forces ``P_i G^+ w`` as an ``(n, 3)`` array."""
        return (self.Gdag @ w.vector).reshape(self.n, 3)


def build_grasp_model(layout: AttachmentLayout) -> GraspModel:
    """Grasp matrix, its pseudoinverse and an orthonormal nullspace basis.

    Raises DegenerateLayout when ``rank(G) < 6``, e.g. for collinear points.
    """
    G = grasp_matrix(layout.b)
    U, s, Vt = np.linalg.svd(G, full_matrices=True)
    rank = int(np.sum(s > RANK_RTOL * s[0]))
    if rank < 6:
        raise DegenerateLayout(
            f"grasp matrix has rank {rank} < 6 (singular values {np.array2string(s, precision=3)})"
        )
    V = Vt.T
    Gdag = V[:, :6] @ np.diag(1.0 / s) @ U.T
    N = np.ascontiguousarray(_canonical_signs(V[:, 6:]))
    for M in (G, Gdag, N):
        M.setflags(write=False)
    return GraspModel(layout, G, Gdag, N)


@dataclass(frozen=True)
class ForceConfig:
    f: np.ndarray

    def __post_init__(self):
        f = np.array(self.f, dtype=float).reshape(-1)
        if f.size % 3:
            raise ValueError("force vector length must be a multiple of 3")
        f.setflags(write=False)
        object.__setattr__(self, "f", f)

    @property
    def n(self) -> int:
        return self.f.size // 3

    def carrier(self, i: int) -> np.ndarray:
        return self.f[3 * i : 3 * i + 3]

    def per_carrier(self) -> np.ndarray:
        return self.f.reshape(-1, 3)

    def tensions(self) -> np.ndarray:
        return np.linalg.norm(self.per_carrier(), axis=1)


@dataclass(frozen=True)
class LambdaPoint:
    lam: np.ndarray

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float).reshape(-1)
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)

    @property
    def k(self) -> int:
        return self.lam.size


def _lam(lam) -> np.ndarray:
    return lam.lam if isinstance(lam, LambdaPoint) else np.asarray(lam, dtype=float)


def forces_from_lambda(gm: GraspModel, w: Wrench, lam) -> ForceConfig:
    lam = _lam(lam)
    if lam.shape != (gm.k,):
        raise ValueError(f"lambda must have shape ({gm.k},), got {lam.shape}")
    return ForceConfig(gm.Gdag @ w.vector + gm.N @ lam)


def lambda_from_forces(gm: GraspModel, w: Wrench, f, tol: float = 1e-6) -> LambdaPoint:
    """Nullspace coordinates of ``f``; raises NotWrenchConsistent if ``G f != w``."""
    f = f.f if isinstance(f, ForceConfig) else np.asarray(f, dtype=float)
    residual = np.linalg.norm(gm.G @ f - w.vector)
    if residual > tol:
        raise NotWrenchConsistent(f"|G f - w| = {residual:.3e} exceeds {tol:.1e}")
    return LambdaPoint(gm.N.T @ (f - gm.Gdag @ w.vector))


@dataclass(frozen=True)
class Admissibility:
    admissible: bool
    min_tension: float
    argmin_carrier: int


def is_admissible(gm: GraspModel, w: Wrench, lam, eps: float = DEFAULT_EPS) -> Admissibility:
    if eps < 0:
        raise ValueError("eps must be non-negative")
    T = forces_from_lambda(gm, w, lam).tensions()
    i = int(np.argmin(T))
    return Admissibility(bool(T[i] > eps), float(T[i]), i)


@dataclass(frozen=True)
class BearingTension:
    q: np.ndarray
    T: float


def bearing_tension(f_i) -> BearingTension:
    f_i = np.asarray(f_i, dtype=float).reshape(3)
    T = float(np.linalg.norm(f_i))
    if T < ZERO_FORCE_TOL:
        raise ZeroForce(f"cable force norm {T:.3e} is zero")
    return BearingTension(f_i / T, T)


def bearing(gm: GraspModel, w: Wrench, lam, i: int) -> BearingTension:
    """Bearing and tension of carrier ``i`` at ``lam``."""
    return bearing_tension(forces_from_lambda(gm, w, lam).carrier(i))


def bearing_differential(gm: GraspModel, w: Wrench, lam, i: int) -> np.ndarray:
    """Jacobian of ``lam -> q_i(lam)``, a ``3 x k`` matrix.

    Equal to ``(I - q q^T) P_i N / T_i``; its rank is 2 whenever ``P_i N`` has
    full rank.
    """
    bt = bearing(gm, w, lam, i)
    proj = np.eye(3) - np.outer(bt.q, bt.q)
    return proj @ gm.block(gm.N, i) / bt.T


def _collinear(points: np.ndarray, rtol: float = RANK_RTOL) -> bool:
    d = points[1:] - points[0]
    s = np.linalg.svd(d, compute_uv=False)
    if s[0] == 0.0:
        return True
    return bool(s.size < 2 or s[1] <= rtol * s[0])


@dataclass(frozen=True)
class LayoutCheck:
    regular: bool
    witness: Optional[tuple] = None
    block_ranks: Optional[tuple] = field(default=None)


def check_layout_assumption(layout: AttachmentLayout) -> LayoutCheck:
    """Test that every ``n - 1`` attachment points are non-collinear.

    For ``n = 3`` the subset test does not apply and the layout is regular iff
    the grasp matrix has full rank. ``witness`` is the first violating subset
    (zero-based indices); ``block_ranks`` lists ``rank(P_i N)`` when the grasp
    model exists.
    """
    n = layout.n
    try:
        gm = build_grasp_model(layout)
    except DegenerateLayout:
        gm = None
    ranks = None
    if gm is not None:
        ranks = tuple(numerical_rank(gm.block(gm.N, i)) for i in range(n))

    witness = None
    if n >= 4:
        for subset in itertools.combinations(range(n), n - 1):
            if _collinear(layout.b[list(subset)]):
                witness = subset
                break
    regular = gm is not None and witness is None
    return LayoutCheck(regular, witness, ranks)
