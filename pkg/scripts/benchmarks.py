"""Exact-solution benchmarks for both solvers: shrinking sphere and cylinder."""
import argparse

import numpy as np

from mcfsurgery.initial_data import CappedCylinder, Sphere, build_initial
from mcfsurgery.level_set import GridSpec, evolve_lsf, signed_distance_init, sublevel_slice
from mcfsurgery.smooth_mcf import extinction_time


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=3)
    a = p.parse_args()
    n = a.n
    for dx in (0.02, 0.01, 0.005):
        T = extinction_time(build_initial(Sphere(1.0), n, dx))
        print(f"smooth sphere dx={dx}: T={T:.6f} exact {1 / (2 * n):.6f}")
    for dx in (0.04, 0.02, 0.01):
        s = build_initial(Sphere(1.0), n, dx)
        f = evolve_lsf(signed_distance_init(s, GridSpec.around(s, dx)), 0.1)
        R = max(c.us.max() for c in sublevel_slice(f).components)
        print(f"level set sphere dx={dx}: R(0.1)={R:.6f} exact {np.sqrt(1 - 0.2 * n):.6f}")
    dx, r0 = 0.01, 0.5
    s = build_initial(CappedCylinder(r0, 2.0), n, dx)
    f = signed_distance_init(s, GridSpec.around(s, dx))
    for t in (0.02, 0.04, 0.055):
        f = evolve_lsf(f, t)
        R = float(sublevel_slice(f).components[0].radius_at(np.array([0.0]))[0])
        print(f"level set cylinder centre t={t}: r={R:.6f} exact {np.sqrt(r0**2 - 2 * (n - 1) * t):.6f}")


if __name__ == "__main__":
    main()
