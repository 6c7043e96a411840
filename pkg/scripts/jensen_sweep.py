"""Jensen and subgradient gaps over random fields, groups and functionals.

    python3 scripts/jensen_sweep.py --fields 20 --resolution 17
"""

import argparse
import time

from symmin.average import average_report
from symmin.energy import linear, negexp, p_dirichlet, polyharmonic, quadratic
from symmin.field import make_grid, random_field
from symmin.group import parse_group_spec

PAIRS = [("interval", "reflect1d"), ("square", "dihedral:4"), ("square", "cyclic:4"), ("disk", "so2:16")]


def functionals():
    nls = [linear(1.0), quadratic(1.0, 0.5), negexp()]
    return [p_dirichlet(p, nl) for p in (1.5, 2.0, 3.0) for nl in nls] + [polyharmonic(1, nl) for nl in nls]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--fields", type=int, default=20)
    ap.add_argument("--resolution", type=int, default=17)
    args = ap.parse_args()

    print(f"{'group':>12} {'functional':>38} {'min jensen':>12} {'min subgrad':>12} {'hull':>5}")
    for domain, spec in PAIRS:
        grid = make_grid(domain, args.resolution)
        G = parse_group_spec(spec)
        fields = [random_field(grid, s, s % 3) for s in range(args.fields)]
        for F in functionals():
            t0 = time.perf_counter()
            reps = [average_report(F, u, G) for u in fields]
            jg = min(r.jensen_gap / (1 + abs(r.energy_u)) for r in reps)
            sg = min(r.subgradient_min_gap / (1 + abs(r.energy_u)) for r in reps)
            hull = all(r.norm_bound_satisfied for r in reps)
            dt = time.perf_counter() - t0
            print(f"{spec:>12} {str(F):>38} {jg:12.3e} {sg:12.3e} {str(hull):>5}  ({dt:.1f}s)")


if __name__ == "__main__":
    main()
