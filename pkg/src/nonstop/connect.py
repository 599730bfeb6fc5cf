"""Piecewise-linear transfer paths between admissible force configurations.

The bad set of carrier ``i`` (``f_i = 0``) is an affine subspace of codimension
3 in lambda-space when ``P_i N`` has full rank, so a random straight segment
misses it almost surely. Segments that come too close are split at a randomly
displaced midpoint and both halves are refined recursively.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GraspModel, LambdaPoint, Wrench, _lam

MIN_CLEARANCE = 1e-3
MAX_DEPTH = 24


class PlanningFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class SegmentClearance:
    clearance: float
    t: float
    carrier: int


@dataclass(frozen=True)
class LambdaPath:
    waypoints: np.ndarray
    clearance: float
    segment_clearances: tuple

    @property
    def points(self) -> list:
        return [LambdaPoint(p) for p in self.waypoints]

    def __len__(self) -> int:
        return self.waypoints.shape[0]


def segment_clearance(gm: GraspModel, w: Wrench, a, b) -> SegmentClearance:
    """Smallest cable force norm along the segment from ``a`` to ``b``.

    For each carrier ``f_i(t) = u + t d`` is affine in ``t``, so its squared
    norm is a quadratic minimized at ``clamp(-u.d / |d|^2, 0, 1)``.
    """
    a = _lam(a)
    b = _lam(b)
    PN = gm.carrier_nullspace()
    u = gm.base_forces(w) + PN @ a
    d = PN @ (b - a)
    dd = np.sum(d * d, axis=1)
    ud = np.sum(u * d, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(dd > 0, np.clip(-ud / dd, 0.0, 1.0), 0.0)
    dist = np.linalg.norm(u + t[:, None] * d, axis=1)
    i = int(np.argmin(dist))
    return SegmentClearance(float(dist[i]), float(t[i]), i)


def _point_clearance(gm, w, lam) -> float:
    f = gm.base_forces(w) + gm.carrier_nullspace() @ lam
    return float(np.linalg.norm(f, axis=1).min())


def plan_path(
    gm: GraspModel,
    w: Wrench,
    start,
    goal,
    min_clearance: float = MIN_CLEARANCE,
    seed: int = 0,
    max_retries: int = 64,
) -> LambdaPath:
    """Join ``start`` to ``goal`` with straight segments of clearance above ``min_clearance``.

    A blocked segment ``[a, b]`` gets a waypoint ``(a + b) / 2 + delta z`` with
    ``z`` a random unit vector and ``delta`` starting at ``|b - a| / 10`` and
    doubling on each rejected draw. ``max_retries`` bounds the draws per split.
    """
    start = np.array(_lam(start), dtype=float)
    goal = np.array(_lam(goal), dtype=float)
    for name, p in (("start", start), ("goal", goal)):
        c = _point_clearance(gm, w, p)
        if not c > min_clearance:
            raise PlanningFailed(f"{name} clearance {c:.3e} N is not above {min_clearance:.3e} N")

    if np.array_equal(start, goal):
        c = _point_clearance(gm, w, start)
        return LambdaPath(start[None, :].copy(), c, ())

    rng = np.random.Generator(np.random.PCG64(seed))
    k = gm.k

    def refine(a, b, depth):
        sc = segment_clearance(gm, w, a, b)
        if sc.clearance > min_clearance:
            return [b], [sc.clearance]
        if depth >= MAX_DEPTH:
            raise PlanningFailed(f"recursion depth {MAX_DEPTH} reached near carrier {sc.carrier}")
        delta = np.linalg.norm(b - a) / 10.0
        mid = a + 0.5 * (b - a)
        for _ in range(max_retries):
            z = rng.standard_normal(k)
            z /= np.linalg.norm(z)
            cand = mid + delta * z
            if _point_clearance(gm, w, cand) > min_clearance:
                left, lc = refine(a, cand, depth + 1)
                right, rc = refine(cand, b, depth + 1)
                return left + right, lc + rc
            delta *= 2.0
        raise PlanningFailed(f"no admissible waypoint after {max_retries} draws")

    rest, clearances = refine(start, goal, 0)
    waypoints = np.vstack([start] + rest)
    return LambdaPath(waypoints, float(min(clearances)), tuple(clearances))
