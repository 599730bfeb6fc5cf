"""Time the numba kernels against their numpy twins.

Both implementations live side by side in ``nonstop._kernels``, so one process
can call either directly; the environment flag only picks the default.

    python3 benchmarks/bench_kernels.py --repeat 5
"""
import argparse
import time

import numpy as np

from nonstop import _kernels
from nonstop.geometry import AttachmentLayout, build_grasp_model, gravity_wrench
from nonstop.orbit import sample_orbit_matrix
from nonstop.sim import SimWorld, desired_trajectory, initial_world


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def orbit_case(n, samples):
    layout = AttachmentLayout.circle(n) if n > 5 else AttachmentLayout.perturbed_circle(n, seed=1)
    gm = build_grasp_model(layout)
    w = gravity_wrench(0.5)
    o = sample_orbit_matrix(gm, w, 100, 0)
    c = gm.base_forces(w)
    B = np.einsum("nik,kj->nij", gm.carrier_nullspace(), o.scaled_A)
    times = np.arange(samples) * (o.period / samples)
    args = (c, B, o.omega, np.full(n, 0.8), times)
    return f"orbit samples n={n} m={samples}", args, _kernels.orbit_samples_numpy, _kernels.orbit_samples_numba


def sim_case(n, steps):
    layout = AttachmentLayout.circle(n) if n > 5 else AttachmentLayout.perturbed_circle(n, seed=1)
    gm = build_grasp_model(layout)
    w = gravity_wrench(0.5)
    o = sample_orbit_matrix(gm, w, 100, 0)
    world = initial_world(gm, w, o, SimWorld(layout))
    p, v = desired_trajectory(gm, w, o, world, 0.5 * world.dt * np.arange(2 * steps + 1))
    args = (world.state_vector(), p, v, world.dt, steps, 10, world.kernel_params())
    return f"RK4 integrate n={n} steps={steps}", args, _kernels.integrate_numpy, _kernels.integrate_numba


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--steps", type=int, default=2000, help="RK4 steps per integrate call")
    ap.add_argument("--samples", type=int, default=4096, help="orbit samples per call")
    args = ap.parse_args(argv)

    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    cases = [orbit_case(5, args.samples), orbit_case(10, args.samples),
             sim_case(5, args.steps), sim_case(10, args.steps)]
    print(f"{'case':<36}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}  max |diff|")
    for name, call_args, f_np, f_nb in cases:
        f_nb(*call_args)  # compile or load from cache outside the timing
        r_np, r_nb = f_np(*call_args), f_nb(*call_args)
        diff = max(float(np.abs(np.asarray(a, float) - np.asarray(b, float)).max()) for a, b in zip(r_np, r_nb))
        t_np = best_of(lambda: f_np(*call_args), args.repeat)
        t_nb = best_of(lambda: f_nb(*call_args), args.repeat)
        print(f"{name:<36}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>9.1f}x  {diff:.1e}")


if __name__ == "__main__":
    main()
