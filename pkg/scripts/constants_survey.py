#!/usr/bin/env python3
"""Survey the sharp constant over random admissible parameter tuples.

For each draw the closed form, the dilation-ratio law, and a quadrature
Rayleigh quotient on the extremal are compared; the worst pairwise spread
is printed per row.  A spread much above 1e-8 flags a grid that is too
narrow for the tuple's tail rate.
"""

import argparse

import numpy as np

from cknlab.fields import make_radial_grid
from cknlab.functionals import grad_norm, q_norm
from cknlab.manifold import canonical_profile
from cknlab.params import derive_params, sharp_constant
from cknlab.transforms import flat_params


def draw_tuple(rng):
    n = int(rng.integers(3, 7))
    p = float(rng.uniform(1.6, min(n - 0.5, 4.0)))
    a_max = (n - p) / p
    a = float(rng.uniform(0.0, 0.6 * a_max))
    b = float(rng.uniform(a, min(a + 0.95, a_max + 0.999)))
    return n, p, a, round(min(b, a + 0.95), 6)

def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=12)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--window", type=float, default=40.0)
    ap.add_argument("--nodes", type=int, default=1536)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    grid = make_radial_grid(-args.window, args.window, args.nodes)
    print(f"{'n':>2} {'p':>6} {'a':>7} {'b':>7}   {'S closed':>12}  {'spread':>9}")
    for _ in range(args.count):
        n, p, a, b = draw_tuple(rng)
        ps = derive_params(n, p, a, b)
        s_closed = sharp_constant(ps)
        s_ratio = ps.k ** (1.0 / ps.p - 1.0 - 1.0 / ps.q) * sharp_constant(flat_params(ps))
        v = canonical_profile(ps, grid)
        s_rayleigh = grad_norm(v, ps) / q_norm(v, ps)
        vals = (s_closed, s_ratio, s_rayleigh)
        spread = (max(vals) - min(vals)) / min(vals)
        print(f"{n:>2} {p:6.3f} {a:7.4f} {b:7.4f}   {s_closed:12.8f}  {spread:9.2e}")


if __name__ == "__main__":
    main()
