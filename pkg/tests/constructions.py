"""Adversarial and random inputs shared by several test modules."""
import numpy as np

from nonstop.geometry import is_admissible
from nonstop.orbit import LinearOrbit


def random_admissible(gm, w, rng, clearance=1e-3, scale=1.0):
    while True:
        lam = rng.normal(scale=scale, size=gm.k)
        if is_admissible(gm, w, lam, clearance).admissible:
            return lam


def straddling_pair(gm, w, carrier=0, seed=0):
    """Endpoints whose midpoint zeroes the force of ``carrier``."""
    rng = np.random.default_rng(seed)
    PN = gm.carrier_nullspace()
    c = gm.base_forces(w)
    center, *_ = np.linalg.lstsq(PN[carrier], -c[carrier], rcond=None)
    d = rng.normal(size=gm.k)
    d *= 0.5 / np.linalg.norm(PN[carrier] @ d)
    return center - d, center + d


def rank_deficient_orbit(gm, seed=0, carrier=0):
    """Random A altered so that ``P_c N A`` has rank 1 (SVD truncation of the block)."""
    rng = np.random.default_rng(seed)
    A0 = rng.random((gm.k, 2))
    PN = gm.carrier_nullspace()[carrier]
    B = PN @ A0
    U, s, Vt = np.linalg.svd(B, full_matrices=False)
    B1 = s[0] * np.outer(U[:, 0], Vt[0])
    A = A0 + np.linalg.pinv(PN) @ (B1 - B)
    assert np.linalg.matrix_rank(PN @ A, tol=1e-10 * s[0]) == 1
    return LinearOrbit(A)


def image_member_orbit(gm, w, seed=0, carrier=0):
    """Random A altered so that the first column of ``P_c N A`` equals ``P_c G^+ w``."""
    rng = np.random.default_rng(seed)
    A0 = rng.random((gm.k, 2))
    PN = gm.carrier_nullspace()[carrier]
    B = PN @ A0
    Bn = B.copy()
    Bn[:, 0] = gm.base_forces(w)[carrier]
    return LinearOrbit(A0 + np.linalg.pinv(PN) @ (Bn - B))
