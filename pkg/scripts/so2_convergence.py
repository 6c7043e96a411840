"""How the cyclic quadrature C_N approaches the SO(2) average, and how the
interpolated action's norm defect shrinks with resolution.

    python3 scripts/so2_convergence.py
"""

import argparse
import math

import numpy as np

from symmin.average import g_average
from symmin.field import GridFunction, make_grid, pullback, sobolev_norm
from symmin.group import parse_group_spec


def blob(x, y):
    return np.exp(-((x - 0.5) ** 2 + y * y) / 0.25**2) * (1 - x * x - y * y)


def bump(x, y, radius=0.8):
    r2 = (x * x + y * y) / radius**2
    inside = r2 < 1
    safe = np.where(inside, 1 - r2, 1.0)
    return np.where(inside, np.exp(-1 / safe), 0.0) * (1 + 2 * x + x * y - 1.5 * y * y + x**3)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--resolutions", type=int, nargs="+", default=[33, 65])
    ap.add_argument("--nodes", type=int, nargs="+", default=[4, 8, 16, 32, 64])
    args = ap.parse_args()

    print("quadrature refinement: |u_{C_N} - u_{C_2N}| (weighted L2)")
    for res in args.resolutions:
        u = GridFunction.from_function(make_grid("disk", res), blob)
        avgs = {n: g_average(u, parse_group_spec(f"so2:{n}")) for n in args.nodes}
        diffs = [(a, b, (avgs[a] - avgs[b]).l2()) for a, b in zip(args.nodes, args.nodes[1:])]
        row = "  ".join(f"{a}->{b}: {d:.3e}" for a, b, d in diffs)
        print(f"  res {res:3d}  {row}")

    print("norm defect max_g |‖g.u‖ - ‖u‖| / ‖u‖ for so2:16")
    prev = None
    for res in args.resolutions:
        u = GridFunction.from_function(make_grid("disk", res), bump)
        ref = sobolev_norm(u, 2.0)
        d = max(abs(sobolev_norm(pullback(g, u), 2.0) - ref) / ref for g in parse_group_spec("so2:16"))
        order = "" if prev is None else f"  order {math.log2(prev / d):.2f}"
        print(f"  res {res:3d}  {d:.3e}{order}")
        prev = d


if __name__ == "__main__":
    main()
