"""Gradient descent on the zero-trace subspace and the symmetrize-then-polish workflow."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from symmin.average import AverageReport, average_report, g_average, invariance_residual
from symmin.energy import EnergyFunctional, check_invariance, energy_change, evaluate, gradient
from symmin.errors import DivergenceError, InvalidParameter, NotInvariantError
from symmin.field import Grid, GridFunction, exact_sum, require_invariant_domain
from symmin.group import SymmetryGroup

INVARIANCE_TOL = 1e-10


@dataclass
class MinimizeOptions:
    max_iters: int = 5000
    grad_tol: float = 1e-8
    shrink: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 60
    energy_floor: float = -1e12
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidParameter("max_iters must be >= 1")
        if not self.grad_tol > 0:
            raise InvalidParameter("grad_tol must be positive")
        if not 0 < self.shrink < 1:
            raise InvalidParameter("shrink factor must lie in (0, 1)")


@dataclass
class MinimizeResult:
    u_min: GridFunction
    energy: float
    iterations: int
    residual: float
    converged: bool
    energy_history: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    message: str = ""

    def history_rows(self):
        return list(zip(range(len(self.energy_history)), self.energy_history, self.residual_history))


def _riesz(F, u):
    """Gradient divided by nodearea: the L2 representative of dF."""
    return gradient(F, u).values / u.grid.nodearea


def _residual(r, grid):
    return math.sqrt(exact_sum(r * r) * grid.nodearea)


def _check_energy(value, opts):
    if not math.isfinite(value):
        raise DivergenceError(f"non-finite energy {value!r}; the functional may have no minimizer")
    if value < opts.energy_floor:
        raise DivergenceError(
            f"energy {value:.6g} fell below the floor {opts.energy_floor:.3g}; "
            "the functional may be unbounded below"
        )


def minimize(F: EnergyFunctional, u0: GridFunction, opts: MinimizeOptions | None = None) -> MinimizeResult:
    """Barzilai-Borwein gradient descent with Armijo backtracking.

    Every accepted step satisfies the sufficient-decrease condition on the
    discrete energy, with the energy change computed term by term
    (``energy_change``) so the test stays meaningful when the change is far
    below the rounding level of F itself. Converged means the nodearea-
    weighted gradient norm fell to ``grad_tol``.
    """
    opts = opts or MinimizeOptions()
    if not F.smooth:
        raise InvalidParameter("minimize needs a differentiable functional (eps > 0 when p < 2)")
    if not u0.is_zero_trace():
        raise InvalidParameter("initial guess must vanish off the free nodes")
    grid = u0.grid
    u = u0
    energy = evaluate(F, u)
    _check_energy(energy, opts)
    r = _riesz(F, u)
    res = _residual(r, grid)
    energies, residuals = [energy], [res]
    step = 1.0 / max(float(np.max(np.abs(r))), 1.0)
    it = 0
    message = "converged"
    while res > opts.grad_tol:
        if it >= opts.max_iters:
            message = "max_iters reached"
            break
        slope = -exact_sum(r * r) * grid.nodearea
        alpha = step
        for _ in range(opts.max_backtracks):
            delta = -alpha * r
            change = energy_change(F, u, delta)
            if math.isfinite(change) and change <= opts.armijo * alpha * slope:
                break
            alpha *= opts.shrink
        else:
            message = "line search stalled"
            break
        u_new = u.with_values(u.values + delta)
        energy = evaluate(F, u_new)
        _check_energy(energy, opts)
        r_new = _riesz(F, u_new)
        s, y = delta, r_new - r
        sy = exact_sum(s * y)
        step = exact_sum(s * s) / sy if sy > 0 else alpha * 2
        u, r = u_new, r_new
        res = _residual(r, grid)
        it += 1
        energies.append(energy)
        residuals.append(res)
    return MinimizeResult(
        u_min=u,
        energy=energies[-1],
        iterations=it,
        residual=res,
        converged=res <= opts.grad_tol,
        energy_history=energies,
        residual_history=residuals,
        message=message,
    )


def poisson_matrix(grid: Grid):
    """Sparse -Lap_h on the free nodes (5-point, zero Dirichlet data)."""
    free = grid.free
    index = -np.ones(grid.shape, dtype=int)
    index[free] = np.arange(int(free.sum()))
    n = int(free.sum())
    if n == 0:
        raise InvalidParameter("grid has no interior nodes; the system is empty")
    rows, cols, vals = [], [], []
    jj, ii = np.nonzero(free)
    k = index[jj, ii]
    ax = 1.0 / (grid.hx * grid.hx)
    diag = np.full(n, 2 * ax)
    neighbours = [(0, 1, ax), (0, -1, ax)]
    if grid.dim == 2:
        ay = 1.0 / (grid.hy * grid.hy)
        diag += 2 * ay
        neighbours += [(1, 0, ay), (-1, 0, ay)]
    rows.append(k)
    cols.append(k)
    vals.append(diag)
    for dj, di, a in neighbours:
        nb = index[jj + dj, ii + di]
        ok = nb >= 0
        rows.append(k[ok])
        cols.append(nb[ok])
        vals.append(np.full(int(ok.sum()), -a))
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return A, index


def direct_poisson_solve(grid: Grid, rhs_constant: float) -> GridFunction:
    """Solve -Lap_h u = rhs_constant on the free nodes with u = 0 elsewhere."""
    A, index = poisson_matrix(grid)
    b = np.full(A.shape[0], float(rhs_constant))
    if rhs_constant == 0:
        return GridFunction.zeros(grid)
    x = spla.spsolve(A.tocsc(), b)
    # one refinement sweep keeps the residual near machine precision
    x = x + spla.spsolve(A.tocsc(), b - A @ x)
    rel = float(np.max(np.abs(A @ x - b)) / np.max(np.abs(b)))
    if rel > 1e-12:
        raise RuntimeError(f"direct solve residual {rel:.3g} exceeds 1e-12")
    values = np.zeros(grid.shape)
    values[grid.free] = x[index[grid.free]]
    return GridFunction(grid, values)


@dataclass
class SymmetrizeResult:
    raw: MinimizeResult
    averaged: GridFunction
    polished: MinimizeResult | None
    report: AverageReport
    averaged_energy: float
    polished_invariance: float | None = None


def symmetrize_and_polish(
    F: EnergyFunctional,
    G: SymmetryGroup,
    u0: GridFunction,
    opts: MinimizeOptions | None = None,
    polish: bool = True,
) -> SymmetrizeResult:
    """Minimize from u0, G-average the minimizer, then minimize again from the average."""
    require_invariant_domain(G, u0.grid)
    raw = minimize(F, u0, opts)
    dev = check_invariance(F, raw.u_min, G)
    if dev > INVARIANCE_TOL * (1 + abs(raw.energy)):
        raise NotInvariantError(
            f"F is not {G.describe()}-invariant at the minimizer (deviation {dev:.3g})"
        )
    averaged = g_average(raw.u_min, G)
    if not averaged.is_zero_trace():
        # interpolated rotations can leak onto boundary nodes; the polish must start in C
        averaged = averaged.project()
    report = average_report(F, raw.u_min, G)
    polished = minimize(F, averaged, opts) if polish else None
    return SymmetrizeResult(
        raw=raw,
        averaged=averaged,
        polished=polished,
        report=report,
        averaged_energy=evaluate(F, averaged),
        polished_invariance=None if polished is None else invariance_residual(polished.u_min, G),
    )

