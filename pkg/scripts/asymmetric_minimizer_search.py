"""Search for minimizers that are not G-invariant.

Minimizes each configuration from several asymmetric random starts and
reports how far each minimizer is from its own G-average and how far the
minimizers from different starts are from each other. A strictly convex
discrete energy has a unique, hence invariant, minimizer, so residuals at
the solver tolerance mean "none found". For groups that do not map the
lattice to itself (exact = False) the discrete energy is only approximately
invariant, so a unique minimizer can sit visibly off its G-average; a small
spread with a large asymmetry is that discretization effect, not a second
minimizer.

    python3 scripts/asymmetric_minimizer_search.py --starts 4
"""

import argparse
import itertools

from symmin.average import g_average
from symmin.energy import linear, negexp, p_dirichlet, polyharmonic, quadratic
from symmin.errors import DivergenceError
from symmin.field import is_grid_exact, make_grid, random_field
from symmin.group import parse_group_spec
from symmin.solve import MinimizeOptions, minimize

CONFIGS = [("square", "dihedral:4"), ("disk", "cyclic:4"), ("regular_polygon:6", "dihedral:6")]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--resolution", type=int, default=17)
    ap.add_argument("--starts", type=int, default=4)
    ap.add_argument("--grad-tol", type=float, default=1e-9)
    args = ap.parse_args()
    opts = MinimizeOptions(grad_tol=args.grad_tol, max_iters=20000)

    nls = [linear(0.0), linear(1.0), quadratic(1.0, 0.5), negexp()]
    functionals = [p_dirichlet(p, nl, eps=1e-3) for p in (1.5, 2.0, 3.0) for nl in nls]
    functionals += [polyharmonic(1, nl) for nl in nls[1:]]
    print(f"{'domain':>18} {'group':>10} {'exact':>5} {'functional':>38} {'max asym':>10} {'spread':>10}")
    for domain, spec in CONFIGS:
        grid = make_grid(domain, args.resolution)
        G = parse_group_spec(spec)
        exact = all(is_grid_exact(g, grid) for g in G)
        for F in functionals:
            try:
                mins = [minimize(F, random_field(grid, 1000 + s, s), opts).u_min for s in range(args.starts)]
            except DivergenceError as exc:
                print(f"{domain:>18} {spec:>10} {exact!s:>5} {str(F):>38}  diverged: {exc}")
                continue
            scale = max(1.0, max(u.max_abs() for u in mins))
            asym = max((u - g_average(u, G)).max_abs() for u in mins) / scale
            spread = max(((a - b).max_abs() for a, b in itertools.combinations(mins, 2)), default=0.0) / scale
            print(f"{domain:>18} {spec:>10} {exact!s:>5} {str(F):>38} {asym:10.2e} {spread:10.2e}")


if __name__ == "__main__":
    main()
