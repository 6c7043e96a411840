"""Property suite behind ``symmin verify-suite``.

Every check records its measured value, the tolerance it is held to and
whether it passed; the suite passes only if all checks do.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from symmin import average as avg
from symmin.energy import (
    EnergyFunctional,
    check_convexity_segment,
    evaluate,
    finite_difference_check,
    gradient,
)
from symmin.field import (
    Grid,
    check_domain_invariance,
    is_grid_exact,
    pullback,
    random_field,
    sobolev_norm,
)
from symmin.group import SymmetryGroup, group_distance, verify_group
from symmin.solve import MinimizeOptions, direct_poisson_solve, minimize


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    note: str = ""


@dataclass
class SuiteResult:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, value, tolerance, passed, note=""):
        self.checks.append(Check(name, float(value), float(tolerance), bool(passed), note))

    def at_most(self, name, value, tolerance, note=""):
        self.add(name, value, tolerance, value <= tolerance, note)

    def at_least(self, name, value, tolerance, note=""):
        self.add(name, value, tolerance, value >= tolerance, note)

    def to_dict(self):
        return {"passed": self.passed, "checks": [asdict(c) for c in self.checks]}


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def run_suite(
    grid: Grid,
    G: SymmetryGroup,
    functionals: list[EnergyFunctional],
    n_fields: int = 10,
    seed: int = 0,
    solver: MinimizeOptions | None = None,
) -> SuiteResult:
    out = SuiteResult()
    violations = verify_group(G).violations
    out.at_most("group.invariants", len(violations), 0, "; ".join(v.check for v in violations))

    mats = list(G)
    sym = max(abs(group_distance(a, b) - group_distance(b, a)) for a, b in itertools.product(mats, mats))
    tri = max(
        group_distance(a, c) - group_distance(a, b) - group_distance(b, c)
        for a, b, c in itertools.product(mats, repeat=3)
    ) if G.order <= 16 else 0.0
    out.at_most("group.metric_symmetry", sym, 1e-12)
    out.at_most("group.triangle_inequality", tri, 1e-12)

    dom = check_domain_invariance(G, grid)
    out.add("field.domain_invariance", dom.worst_excess, 1e-9, dom.ok, f"witness {dom.witness}")
    if not dom.ok:
        return out

    exact = all(is_grid_exact(g, grid) for g in G)
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**31, size=(n_fields, 2))
    fields = [random_field(grid, int(a), 0) for a, _ in seeds]
    partners = [random_field(grid, int(b), 2) for _, b in seeds]

    if exact:
        worst = max(
            _rel(sobolev_norm(pullback(g, u), 2.0, order), sobolev_norm(u, 2.0, order))
            for u in fields[:3] for g in G for order in (1, 2)
        )
        out.at_most("field.norm_invariance", worst, 1e-12)

    inv_res, idem, lin = 0.0, 0.0, 0.0
    for u, v in zip(fields, partners):
        ug = avg.g_average(u, G)
        scale = 1 + u.max_abs()
        inv_res = max(inv_res, avg.check_average_invariance(u, G) / scale)
        if exact:
            again = avg.g_average(ug, G).values
        else:
            # u_G read as the averaged interpolant: averaging it again is the
            # double average over the composed elements g h, no re-interpolation
            again = avg.orbit_average(
                np.stack([avg.orbit_average(avg.orbit(u, G, right=h.matrix), G.weights) for h in G]),
                G.weights,
            )
        idem = max(idem, float(np.max(np.abs(again - ug.values))) / scale)
        combo = avg.g_average(2.0 * u - 0.5 * v, G)
        ref = 2.0 * ug.values - 0.5 * avg.g_average(v, G).values
        lin = max(lin, float(np.max(np.abs(combo.values - ref))) / (1 + np.max(np.abs(ref))))
    reading = "" if exact else "interpolant reading"
    out.at_most("average.invariance", inv_res, 1e-12, reading)
    out.at_most("average.idempotence", idem, 1e-13, reading)
    out.at_most("average.linearity", lin, 1e-13)

    for F in functionals:
        tag = str(F)
        out.at_most(f"energy.gradient_fd[{tag}]", finite_difference_check(F, fields[0], seed=seed), 1e-5)
        off_free = float(np.max(np.abs(gradient(F, fields[0]).values[~grid.free])))
        out.at_most(f"energy.gradient_off_free[{tag}]", off_free, 0.0)
        if exact:
            dev = max(
                abs(evaluate(F, pullback(g, u)) - evaluate(F, u)) / (1 + abs(evaluate(F, u)))
                for u in fields[:3] for g in G
            )
            out.at_most(f"energy.invariance[{tag}]", dev, 1e-12)
        conv, jensen, sub, hull = np.inf, np.inf, np.inf, True
        for u, v in zip(fields, partners):
            fu, fv = evaluate(F, u), evaluate(F, v)
            gaps = check_convexity_segment(F, u, v, [0.0, 0.25, 0.5, 0.75, 1.0])
            conv = min(conv, min(gaps) / (1 + abs(fu) + abs(fv)))
            rep = avg.average_report(F, u, G)
            jensen = min(jensen, rep.jensen_gap / (1 + abs(fu)))
            sub = min(sub, rep.subgradient_min_gap / (1 + abs(fu)))
            hull = hull and rep.norm_bound_satisfied
        out.at_least(f"energy.convexity[{tag}]", conv, -1e-10)
        out.at_least(f"average.jensen[{tag}]", jensen, -1e-10)
        if F.smooth:
            out.at_least(f"average.subgradient[{tag}]", sub, -1e-10)
        out.add(f"average.hull_norm_bound[{tag}]", float(hull), 1.0, hull)

        if F.smooth:
            opts = solver or MinimizeOptions(max_iters=2000)
            res = minimize(F, fields[0], opts)
            h = np.asarray(res.energy_history)
            rise = float(np.max(np.maximum(h[1:] - h[:-1], 0) / np.abs(h[:-1]))) if len(h) > 1 else 0.0
            out.at_most(f"solve.monotone[{tag}]", rise, 1e-14, f"{res.iterations} iterations")
            linear_p2 = (
                F.kind == "p-dirichlet" and F.p == 2 and F.nonlinearity.tag == "linear"
            )
            if linear_p2:
                tight = MinimizeOptions(max_iters=20000, grad_tol=1e-10)
                sol = minimize(F, fields[0], tight).u_min
                ref = direct_poisson_solve(grid, F.nonlinearity.params[0])
                err = (sol - ref).l2() / max(ref.l2(), 1e-300)
                out.at_most(f"solve.oracle[{tag}]", err, 1e-8)
    return out
