"""The G-average u_G = sum_g w_g (g.u) and the inequalities it must satisfy.

The grid-level functions all reduce to a handful of orbit-level helpers
that work on plain arrays, so the same code path can be checked on toy
vector spaces where every quantity is known by hand.

Summation over group elements sorts the orbit values node-wise and then
adds with Neumaier compensation. Sorting makes the result a function of
the multiset of orbit values only, so left-multiplying the orbit by a
group element (which permutes it) reproduces u_G bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from symmin.energy import EnergyFunctional, evaluate, full_gradient
from symmin.field import (
    GridFunction,
    exact_sum,
    is_grid_exact,
    pullback,
    require_invariant_domain,
    sobolev_norm,
)
from symmin.group import SymmetryGroup

JENSEN_TOL = 1e-10
HULL_TOL = 1e-12


def compensated_sum(stack) -> np.ndarray:
    """Order-independent sum over axis 0 (sort, then Neumaier)."""
    stack = np.sort(np.asarray(stack, dtype=float), axis=0)
    total = np.zeros(stack.shape[1:])
    comp = np.zeros(stack.shape[1:])
    for layer in stack:
        t = total + layer
        comp += np.where(np.abs(total) >= np.abs(layer), (total - t) + layer, (layer - t) + total)
        total = t
    return total + comp


def orbit_average(points, weights) -> np.ndarray:
    """Weighted average of orbit points stacked along axis 0."""
    points = np.asarray(points, dtype=float)
    w = np.asarray(weights, dtype=float)
    if np.all(w == w[0]):
        return compensated_sum(points) / len(w)
    return compensated_sum(w.reshape((-1,) + (1,) * (points.ndim - 1)) * points)


def jensen_gap_points(energy, points, weights) -> float:
    """sum_g w_g E(g.u) - E(u_G)."""
    mean = orbit_average(points, weights)
    return math.fsum(w * energy(x) for w, x in zip(weights, points)) - energy(mean)


def subgradient_gaps_points(energy, grad, points, weights, pairing=None):
    """E(g.u) - E(u_G) - <grad E(u_G), g.u - u_G> for each orbit point."""
    pairing = pairing or (lambda a, b: math.fsum(np.ravel(a * b).tolist()))
    mean = orbit_average(points, weights)
    e_mean, beta = energy(mean), grad(mean)
    return [energy(x) - e_mean - pairing(beta, x - mean) for x in points]


def mean_value_distance_points(points, weights, norm=None):
    """(index, distance) of the orbit point closest to the average."""
    norm = norm or (lambda a: float(np.linalg.norm(np.ravel(a))))
    mean = orbit_average(points, weights)
    dists = [norm(mean - x) for x in points]
    k = int(np.argmin(dists))
    return k, dists[k]


# grid-level operations -------------------------------------------------------


def orbit(u: GridFunction, G: SymmetryGroup, right=None) -> np.ndarray:
    """Stack of (g.u) values; with ``right`` the elements are g @ right."""
    mats = [g.matrix if right is None else g.matrix @ right for g in G]
    return np.stack([pullback(m, u).values for m in mats])


def g_average(u: GridFunction, G: SymmetryGroup) -> GridFunction:
    require_invariant_domain(G, u.grid)
    return GridFunction(u.grid, orbit_average(orbit(u, G), G.weights))


def _grid_exact(G, grid):
    return all(is_grid_exact(g, grid) for g in G)


def check_average_invariance(u: GridFunction, G: SymmetryGroup) -> float:
    """max over h in G of ||h.u_G - u_G||_inf.

    For lattice-preserving groups h.u_G is the exact permutation of u_G.
    Otherwise u_G is read as the averaged interpolant of u, whose pullback
    by h is the average of the composed orbit (g h).u; no second
    interpolation enters, so the residual measures the group structure
    of the quadrature set rather than interpolation error.
    """
    require_invariant_domain(G, u.grid)
    ug = orbit_average(orbit(u, G), G.weights)
    exact = _grid_exact(G, u.grid)
    worst = 0.0
    for h in G:
        if exact:
            moved = pullback(h, GridFunction(u.grid, ug)).values
        else:
            moved = orbit_average(orbit(u, G, right=h.matrix), G.weights)
        worst = max(worst, float(np.max(np.abs(moved - ug))))
    return worst


def invariance_residual(u: GridFunction, G: SymmetryGroup) -> float:
    """max_g ||g.u - u||_inf: how far u itself is from G-invariant."""
    return max(float(np.max(np.abs(pullback(g, u).values - u.values))) for g in G)


def _energy_fn(F, grid):
    return lambda values: evaluate(F, GridFunction(grid, values))


def jensen_gap(F: EnergyFunctional, u: GridFunction, G: SymmetryGroup) -> float:
    require_invariant_domain(G, u.grid)
    return jensen_gap_points(_energy_fn(F, u.grid), orbit(u, G), G.weights)


def hull_norm_bound(u: GridFunction, G: SymmetryGroup, p: float = 2.0) -> bool:
    """||u_G||_{1,p} <= max_g ||g.u||_{1,p} (relative slack 1e-12)."""
    require_invariant_domain(G, u.grid)
    pts = orbit(u, G)
    return _hull_bound(u.grid, pts, G.weights, p)


def _hull_bound(grid, pts, weights, p):
    avg = sobolev_norm(GridFunction(grid, orbit_average(pts, weights)), p, 1)
    top = max(sobolev_norm(GridFunction(grid, x), p, 1) for x in pts)
    return avg <= top * (1 + HULL_TOL)


def _pairing(grid):
    # partials already carry nodearea, so the plain dot product is the weighted L2 pairing
    return lambda a, b: exact_sum(a * b)


def subgradient_gap(F: EnergyFunctional, u: GridFunction, G: SymmetryGroup) -> float:
    """min_g [F(g.u) - F(u_G) - <grad F(u_G), g.u - u_G>]."""
    require_invariant_domain(G, u.grid)
    grid = u.grid
    gaps = subgradient_gaps_points(
        _energy_fn(F, grid),
        lambda v: full_gradient(F, GridFunction(grid, v)),
        orbit(u, G),
        G.weights,
        _pairing(grid),
    )
    return min(gaps)


@dataclass
class AverageReport:
    jensen_gap: float
    invariance_residual: float
    norm_bound_satisfied: bool
    subgradient_min_gap: float
    energy_u: float = float("nan")
    energy_average: float = float("nan")
    group: str = ""
    grid_exact: bool = True

    def to_dict(self):
        return asdict(self)

    def passes(self, tol=JENSEN_TOL) -> bool:
        slack = tol * (1 + abs(self.energy_u))
        return (
            self.jensen_gap >= -slack
            and self.norm_bound_satisfied
            and self.subgradient_min_gap >= -slack
        )


def average_report(F: EnergyFunctional, u: GridFunction, G: SymmetryGroup, p=None) -> AverageReport:
    """All G-average diagnostics from a single orbit computation.

    ``p`` is the exponent of the hull norm bound; defaults to F.p for
    p-Dirichlet energies and 2 otherwise.
    """
    require_invariant_domain(G, u.grid)
    grid = u.grid
    pts = orbit(u, G)
    energy = _energy_fn(F, grid)
    ug = orbit_average(pts, G.weights)
    if p is None:
        p = F.p if F.kind == "p-dirichlet" else 2.0
    gaps = subgradient_gaps_points(
        energy, lambda v: full_gradient(F, GridFunction(grid, v)), pts, G.weights, _pairing(grid)
    )
    return AverageReport(
        jensen_gap=jensen_gap_points(energy, pts, G.weights),
        invariance_residual=check_average_invariance(u, G),
        norm_bound_satisfied=_hull_bound(grid, pts, G.weights, p),
        subgradient_min_gap=min(gaps),
        energy_u=evaluate(F, u),
        energy_average=energy(ug),
        group=G.describe(),
        grid_exact=_grid_exact(G, grid),
    )
