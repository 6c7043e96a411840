"""Discrete p-Dirichlet and polyharmonic energies with exact gradients.

p-Dirichlet:   sum_cells (1/p) (|grad_h u|^2 + eps^2)^(p/2) * cellarea - sum_nodes f(u) * nodearea
polyharmonic:  sum_nodes ((Lap_h^m u)^2 / 2 - f(u)) * nodearea

Cells are those with at least one free corner; |grad_h u|^2 averages the
squared differences on each pair of parallel cell edges, which makes p = 2
reduce exactly to the 5-point Laplacian. Gradients are derivatives of
these sums, not re-discretized PDE operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from symmin.errors import InvalidParameter
from symmin.field import (
    GridFunction,
    cell_gradient_sq,
    edge_differences,
    exact_sum,
    poly_laplacian,
    pullback,
    require_invariant_domain,
)
from symmin.group import SymmetryGroup

DEFAULT_EPS = 1e-8


@dataclass(frozen=True)
class ConcaveNonlinearity:
    """Concave f with closed-form derivative.

    Built-ins: linear(lam): lam*s; quadratic(a, b): a*s - b*s^2 (b >= 0);
    negexp: -exp(s). ``custom`` wraps a user expression, admitted only after
    the sampled concavity gate.
    """

    tag: str
    params: tuple = ()
    _f: Callable | None = field(default=None, repr=False, compare=False)
    _df: Callable | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.tag == "quadratic" and self.params[1] < 0:
            raise InvalidParameter("quadratic nonlinearity needs b >= 0 for concavity")
        if self.tag not in ("linear", "quadratic", "negexp", "custom"):
            raise InvalidParameter(f"unknown nonlinearity {self.tag!r}")

    def f(self, s):
        s = np.asarray(s, dtype=float)
        if self.tag == "linear":
            return self.params[0] * s
        if self.tag == "quadratic":
            a, b = self.params
            return a * s - b * s * s
        if self.tag == "negexp":
            return -np.exp(s)
        return np.asarray(self._f(s), dtype=float) * np.ones_like(s)

    def df(self, s):
        s = np.asarray(s, dtype=float)
        if self.tag == "linear":
            return np.full_like(s, self.params[0])
        if self.tag == "quadratic":
            a, b = self.params
            return a - 2 * b * s
        if self.tag == "negexp":
            return -np.exp(s)
        return np.asarray(self._df(s), dtype=float) * np.ones_like(s)

    def change(self, s, ds):
        """f(s + ds) - f(s) without cancellation for the built-ins."""
        if self.tag == "linear":
            return self.params[0] * ds
        if self.tag == "quadratic":
            a, b = self.params
            return a * ds - b * ds * (2 * s + ds)
        if self.tag == "negexp":
            return -np.exp(s) * np.expm1(ds)
        return self.f(s + ds) - self.f(s)

    def __str__(self):
        if self.tag == "negexp":
            return "negexp"
        if self.tag == "custom":
            return f"expr:{self.params[0]}"
        return f"{self.tag}:" + ",".join(f"{p:g}" for p in self.params)


def linear(lam: float = 1.0) -> ConcaveNonlinearity:
    return ConcaveNonlinearity("linear", (float(lam),))


def quadratic(a: float, b: float) -> ConcaveNonlinearity:
    return ConcaveNonlinearity("quadratic", (float(a), float(b)))


def negexp() -> ConcaveNonlinearity:
    return ConcaveNonlinearity("negexp")


def concavity_violation(nl: ConcaveNonlinearity, samples: int = 1000, seed: int = 0, box=10.0):
    """Worst sampled violation of midpoint concavity and of a nonincreasing f'.

    Returns (midpoint_violation, derivative_increase); both <= 0 up to
    rounding for a concave f.
    """
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(-box, box, size=(2, samples))
    fa, fb, fm = nl.f(a), nl.f(b), nl.f((a + b) / 2)
    scale = 1.0 + np.maximum(np.abs(fa), np.abs(fb))
    mid = float(np.max(((fa + fb) / 2 - fm) / scale))
    s = np.sort(rng.uniform(-box, box, size=samples))
    d = nl.df(s)
    rise = float(np.max((d[1:] - d[:-1]) / (1.0 + np.abs(d[:-1]))))
    return mid, rise


def custom_nonlinearity(expression: str, tol: float = 1e-12) -> ConcaveNonlinearity:
    """f from a sympy expression in ``s``, rejected unless sampled-concave."""
    import sympy

    s = sympy.Symbol("s")
    try:
        expr = sympy.sympify(expression, locals={"s": s})
    except (sympy.SympifyError, TypeError, SyntaxError) as exc:
        raise InvalidParameter(f"cannot parse nonlinearity {expression!r}: {exc}") from None
    if expr.free_symbols - {s}:
        raise InvalidParameter(f"nonlinearity may only use the variable s: {expression!r}")
    f = sympy.lambdify(s, expr, "numpy")
    df = sympy.lambdify(s, sympy.diff(expr, s), "numpy")
    nl = ConcaveNonlinearity("custom", (expression,), f, df)
    mid, rise = concavity_violation(nl)
    if not (mid <= tol and rise <= tol):
        raise InvalidParameter(
            f"nonlinearity {expression!r} failed the concavity gate "
            f"(midpoint {mid:.3g}, f' increase {rise:.3g})"
        )
    return nl


def parse_nonlinearity(spec: str) -> ConcaveNonlinearity:
    """``linear:lam`` | ``quadratic:a,b`` | ``negexp`` | ``expr:<sympy in s>``."""
    name, _, arg = spec.strip().partition(":")
    name = name.lower()
    try:
        if name == "linear":
            return linear(float(arg) if arg else 1.0)
        if name == "quadratic":
            a, b = (float(x) for x in arg.split(","))
            return quadratic(a, b)
    except ValueError:
        raise InvalidParameter(f"bad nonlinearity parameters in {spec!r}") from None
    if name == "negexp" and not arg:
        return negexp()
    if name == "expr" and arg:
        return custom_nonlinearity(arg)
    raise InvalidParameter(f"unknown nonlinearity {spec!r}")


@dataclass(frozen=True)
class EnergyFunctional:
    kind: str
    nonlinearity: ConcaveNonlinearity = field(default_factory=linear)
    p: float = 2.0
    eps: float = DEFAULT_EPS
    m: int = 1

    def __post_init__(self):
        if self.kind == "p-dirichlet":
            if not self.p > 1:
                raise InvalidParameter(f"p must exceed 1, got {self.p!r}")
            if not self.eps >= 0:
                raise InvalidParameter(f"eps must be >= 0, got {self.eps!r}")
        elif self.kind == "polyharmonic":
            if int(self.m) != self.m or self.m < 1:
                raise InvalidParameter(f"polyharmonic order must be a positive integer, got {self.m!r}")
        else:
            raise InvalidParameter(f"unknown functional kind {self.kind!r}")

    @property
    def smooth(self) -> bool:
        """Differentiable everywhere (needed by the solver and subgradient check)."""
        return self.kind == "polyharmonic" or self.eps > 0 or self.p >= 2

    def __call__(self, u: GridFunction) -> float:
        return evaluate(self, u)

    def __str__(self):
        if self.kind == "p-dirichlet":
            head = f"plaplace:p={self.p:g},eps={self.eps:g}"
        else:
            head = f"polyharmonic:m={self.m}"
        return f"{head} f={self.nonlinearity}"


def p_dirichlet(p, nonlinearity=None, eps=DEFAULT_EPS) -> EnergyFunctional:
    return EnergyFunctional("p-dirichlet", nonlinearity or linear(1.0), p=float(p), eps=float(eps))


def polyharmonic(m, nonlinearity=None) -> EnergyFunctional:
    if int(m) != m:
        raise InvalidParameter(f"polyharmonic order must be a positive integer, got {m!r}")
    return EnergyFunctional("polyharmonic", nonlinearity or linear(1.0), m=int(m))


def parse_functional(spec: str, nonlinearity: ConcaveNonlinearity | None = None) -> EnergyFunctional:
    """``plaplace:p=_,eps=_`` (eps optional) or ``polyharmonic:m=_``."""
    name, _, arg = spec.strip().partition(":")
    kv = {}
    for part in filter(None, arg.split(",")):
        key, eq, val = part.partition("=")
        if not eq:
            raise InvalidParameter(f"expected key=value in functional spec {spec!r}")
        try:
            kv[key.strip().lower()] = float(val)
        except ValueError:
            raise InvalidParameter(f"bad number {val!r} in functional spec {spec!r}") from None
    name = name.strip().lower()
    if name in ("plaplace", "p-dirichlet"):
        if set(kv) - {"p", "eps"} or "p" not in kv:
            raise InvalidParameter(f"plaplace spec needs p (and optional eps): {spec!r}")
        return p_dirichlet(kv["p"], nonlinearity, kv.get("eps", DEFAULT_EPS))
    if name == "polyharmonic":
        if set(kv) != {"m"}:
            raise InvalidParameter(f"polyharmonic spec needs m: {spec!r}")
        return polyharmonic(kv["m"], nonlinearity)
    raise InvalidParameter(f"unknown functional {spec!r}")


# evaluation -----------------------------------------------------------------


def _check(F, u):
    if not isinstance(u, GridFunction):
        raise InvalidParameter("energy expects a GridFunction")


def evaluate(F: EnergyFunctional, u: GridFunction) -> float:
    _check(F, u)
    grid = u.grid
    source = exact_sum(F.nonlinearity.f(u.values[grid.mask])) * grid.nodearea
    if F.kind == "p-dirichlet":
        q = cell_gradient_sq(u.values, grid)[grid.active_cells]
        top = exact_sum((q + F.eps**2) ** (F.p / 2)) / F.p * grid.cellarea
    else:
        lap = poly_laplacian(u.values, grid, F.m)[grid.mask]
        top = exact_sum(lap * lap) / 2 * grid.nodearea
    return top - source


def _sorted_sum(parts):
    # order-free reduction so the result commutes with lattice symmetries bit for bit
    stack = np.sort(np.stack(parts), axis=0)
    total = stack[0]
    for layer in stack[1:]:
        total = total + layer
    return total


def _pdirichlet_full_gradient(F, u):
    grid = u.grid
    v = u.values
    q = cell_gradient_sq(v, grid)
    base = q + F.eps**2
    # d|g|^p/dg -> 0 as g -> 0 for p > 1, so flat cells contribute nothing
    live = grid.active_cells & (base > 0)
    coef = np.zeros_like(base)
    coef[live] = 0.5 * base[live] ** (F.p / 2 - 1)
    coef = coef * grid.cellarea
    xs, ys = edge_differences(v, grid.dim)
    ny, nx = grid.shape
    if grid.dim == 1:
        d = 2 * xs[0] / (grid.hx * grid.hx)
        left = np.zeros(grid.shape)
        right = np.zeros(grid.shape)
        left[:, :-1] = -coef * d
        right[:, 1:] = coef * d
        return left + right
    (dxb, dxt), (dyl, dyr) = xs, ys
    ax, ay = grid.hx * grid.hx, grid.hy * grid.hy
    parts = [np.zeros(grid.shape) for _ in range(4)]
    # d q / d corner, one two-term sum per corner
    parts[0][:-1, :-1] = coef * (-dxb / ax + -dyl / ay)
    parts[1][:-1, 1:] = coef * (dxb / ax + -dyr / ay)
    parts[2][1:, :-1] = coef * (-dxt / ax + dyl / ay)
    parts[3][1:, 1:] = coef * (dxt / ax + dyr / ay)
    return _sorted_sum(parts)


def full_gradient(F: EnergyFunctional, u: GridFunction) -> np.ndarray:
    """Partial derivatives of ``evaluate`` w.r.t. every masked node value."""
    _check(F, u)
    grid = u.grid
    if F.kind == "p-dirichlet":
        top = _pdirichlet_full_gradient(F, u)
    else:
        top = poly_laplacian(poly_laplacian(u.values, grid, F.m), grid, F.m) * grid.nodearea
    g = top - F.nonlinearity.df(u.values) * grid.nodearea
    return np.where(grid.mask, g, 0.0)


def gradient(F: EnergyFunctional, u: GridFunction) -> GridFunction:
    """Partial derivatives of ``evaluate`` w.r.t. free-node values; zero elsewhere."""
    g = full_gradient(F, u)
    return GridFunction(u.grid, np.where(u.grid.free, g, 0.0))


def energy_change(F: EnergyFunctional, u: GridFunction, step: np.ndarray) -> float:
    """F(u + step) - F(u), computed term by term to avoid cancellation."""
    grid = u.grid
    v, s = u.values, np.where(grid.mask, step, 0.0)
    dsource = exact_sum(F.nonlinearity.change(v[grid.mask], s[grid.mask])) * grid.nodearea
    if F.kind == "p-dirichlet":
        xs0, ys0 = edge_differences(v, grid.dim)
        xsd, ysd = edge_differences(s, grid.dim)
        if grid.dim == 1:
            dq = xsd[0] * (2 * xs0[0] + xsd[0]) / (grid.hx * grid.hx)
        else:
            dqx = sum(d * (2 * a + d) for a, d in zip(xs0, xsd)) / (grid.hx * grid.hx)
            dqy = sum(d * (2 * a + d) for a, d in zip(ys0, ysd)) / (grid.hy * grid.hy)
            dq = (dqx + dqy) / 2
        base = cell_gradient_sq(v, grid) + F.eps**2
        act = grid.active_cells
        base, dq = base[act], dq[act]
        half = F.p / 2
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.expm1(half * np.log1p(dq / base))
            dphi = np.where(base > 0, base**half * rel, np.maximum(base + dq, 0.0) ** half)
        dtop = exact_sum(dphi) / F.p * grid.cellarea
    else:
        a = poly_laplacian(v, grid, F.m)[grid.mask]
        d = poly_laplacian(s, grid, F.m)[grid.mask]
        dtop = exact_sum(d * (2 * a + d)) / 2 * grid.nodearea
    return dtop - dsource


# checks ---------------------------------------------------------------------


def check_invariance(F: EnergyFunctional, u: GridFunction, G: SymmetryGroup) -> float:
    """max_g |F(g.u) - F(u)| over the group."""
    require_invariant_domain(G, u.grid)
    base = evaluate(F, u)
    return max(abs(evaluate(F, pullback(g, u)) - base) for g in G)


def check_convexity_segment(F: EnergyFunctional, u: GridFunction, v: GridFunction, t_samples):
    """Jensen gaps t F(u) + (1-t) F(v) - F(t u + (1-t) v) along the segment."""
    if not u.grid.same_as(v.grid):
        raise InvalidParameter("grid mismatch")
    fu, fv = evaluate(F, u), evaluate(F, v)
    gaps = []
    for t in t_samples:
        t = float(t)
        if not 0.0 <= t <= 1.0:
            raise InvalidParameter(f"segment parameter {t} outside [0, 1]")
        if t == 1.0:
            w = u
        elif t == 0.0:
            w = v
        else:
            w = u.with_values(t * u.values + (1 - t) * v.values)
        gaps.append(t * fu + (1 - t) * fv - evaluate(F, w))
    return gaps


def relative_tolerance(tol, *values):
    return tol * (1.0 + sum(abs(v) for v in values))


def finite_difference_check(F, u, n_coords=20, seed=0, step_scale=1e-6):
    """Central differences of ``evaluate`` at random free coordinates.

    Returns the worst relative error |fd - g| / max(|g|, 1e-12 * max|g|).
    """
    rng = np.random.default_rng(seed)
    free = np.flatnonzero(u.grid.free.ravel())
    picks = rng.choice(free, size=min(n_coords, free.size), replace=False)
    g = gradient(F, u).values.ravel()
    floor = 1e-12 * max(float(np.max(np.abs(g))), 1e-300)
    worst = 0.0
    for k in picks:
        h = step_scale * (1 + abs(u.values.flat[k]))
        e = np.zeros(u.grid.shape)
        e.flat[k] = h
        fd = (evaluate(F, u + e) - evaluate(F, u - e)) / (2 * h)
        worst = max(worst, abs(fd - g[k]) / max(abs(g[k]), floor))
    return worst


