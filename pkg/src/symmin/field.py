"""Masked uniform grids over symmetric domains and the pullback group action.

Node values live in arrays of shape (ny, nx), row index = y. A 1D grid has
ny == 1. Domains are scaled into [-1, 1]^d and centered at the origin so
that group matrices (which fix the origin) act on them directly.

Three node classes matter:

* mask-false nodes lie outside the closed domain and always hold 0;
* free nodes are masked nodes whose lattice neighbours all exist and are
  masked; these carry the unknowns of a zero-trace problem;
* the remaining masked nodes form the discrete boundary.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from symmin.errors import InvalidParameter, InvariantDomainViolation
from symmin.group import GroupElement, SymmetryGroup

LATTICE_TOL = 1e-9
DOMAIN_TOL = 1e-9


def exact_sum(a) -> float:
    """Correctly rounded sum; independent of element order."""
    return math.fsum(np.asarray(a, dtype=float).ravel().tolist())


@dataclass(frozen=True)
class DomainSpec:
    kind: str
    param: float | None = None

    KINDS = ("interval", "square", "disk", "annulus", "regular_polygon")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidParameter(f"unknown domain {self.kind!r}")
        if self.kind == "annulus" and not (self.param is not None and 0 < self.param < 1):
            raise InvalidParameter(f"annulus inner radius must lie in (0, 1), got {self.param!r}")
        if self.kind == "regular_polygon":
            if self.param is None or int(self.param) != self.param or self.param < 3:
                raise InvalidParameter(f"regular_polygon needs k >= 3 sides, got {self.param!r}")

    @property
    def dim(self) -> int:
        return 1 if self.kind == "interval" else 2

    def excess(self, x, y=None):
        """How far points lie outside the closed domain (<= 0 inside)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "interval":
            return np.abs(x) - 1.0
        y = np.asarray(y, dtype=float)
        if self.kind == "square":
            return np.maximum(np.abs(x), np.abs(y)) - 1.0
        r = np.hypot(x, y)
        if self.kind == "disk":
            return r - 1.0
        if self.kind == "annulus":
            return np.maximum(r - 1.0, self.param - r)
        k = int(self.param)
        apothem = math.cos(math.pi / k)
        normals = np.pi / k + 2 * np.pi * np.arange(k) / k
        support = np.max(
            np.cos(normals)[:, None] * x.ravel() + np.sin(normals)[:, None] * y.ravel(), axis=0
        )
        return (support - apothem).reshape(x.shape)

    def __str__(self):
        if self.kind == "annulus":
            return f"annulus:{self.param:g}"
        if self.kind == "regular_polygon":
            return f"regular_polygon:{int(self.param)}"
        return self.kind


def parse_domain_spec(spec) -> DomainSpec:
    """Accepts ``interval``, ``square``, ``disk``, ``annulus:r0`` / ``annulus(r0)``,
    ``regular_polygon:k`` / ``polygon:k``."""
    if isinstance(spec, DomainSpec):
        return spec
    text = str(spec).strip().lower().replace("(", ":").rstrip(")")
    name, _, arg = text.partition(":")
    if name == "polygon":
        name = "regular_polygon"
    if name in ("annulus", "regular_polygon"):
        if not arg:
            raise InvalidParameter(f"domain {spec!r} needs a parameter")
        try:
            value = float(arg)
        except ValueError:
            raise InvalidParameter(f"bad domain parameter in {spec!r}") from None
        return DomainSpec(name, value)
    if arg:
        raise InvalidParameter(f"domain {name!r} takes no parameter")
    return DomainSpec(name)


@dataclass(frozen=True, eq=False)
class Grid:
    nx: int
    ny: int
    hx: float
    hy: float
    mask: np.ndarray
    domain: DomainSpec | None = None

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise InvalidParameter("grid needs positive node counts")
        if not (self.hx > 0 and self.hy > 0):
            raise InvalidParameter(f"spacings must be positive, got {self.hx}, {self.hy}")
        mask = np.array(self.mask, dtype=bool).reshape(self.ny, self.nx)
        if not mask.any():
            raise InvalidParameter("grid mask selects no nodes")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "free", _free_nodes(mask, self.dim))
        object.__setattr__(self, "active_cells", _active_cells(mask, self.dim))

    @property
    def dim(self) -> int:
        return 1 if self.ny == 1 else 2

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def origin(self):
        oy = 0.0 if self.dim == 1 else -(self.ny - 1) * self.hy / 2
        return (-(self.nx - 1) * self.hx / 2, oy)

    @property
    def nodearea(self) -> float:
        return self.hx if self.dim == 1 else self.hx * self.hy

    cellarea = nodearea

    @functools.cached_property
    def coords(self):
        ox, oy = self.origin
        x = ox + self.hx * np.arange(self.nx)
        y = oy + self.hy * np.arange(self.ny) if self.dim == 2 else np.zeros(1)
        X, Y = np.meshgrid(x, y)
        return X, Y

    def same_as(self, other: "Grid") -> bool:
        return other is self or (
            self.nx == other.nx
            and self.ny == other.ny
            and self.hx == other.hx
            and self.hy == other.hy
            and np.array_equal(self.mask, other.mask)
        )

    def excess(self, x, y):
        """Distance-like measure of how far points sit outside the domain."""
        if self.domain is not None:
            return self.domain.excess(x) if self.dim == 1 else self.domain.excess(x, y)
        # mask-only grid (e.g. read from file): inside iff the nearest node is masked
        ox, oy = self.origin
        fi = np.rint((np.asarray(x) - ox) / self.hx).astype(int)
        fj = np.zeros_like(fi) if self.dim == 1 else np.rint((np.asarray(y) - oy) / self.hy).astype(int)
        ok = (fi >= 0) & (fi < self.nx) & (fj >= 0) & (fj < self.ny)
        inside = np.zeros(fi.shape, dtype=bool)
        inside[ok] = self.mask[fj[ok], fi[ok]]
        return np.where(inside, 0.0, 1.0)


def _free_nodes(mask, dim):
    free = mask.copy()
    free[:, 0] = free[:, -1] = False
    free[:, 1:-1] &= mask[:, :-2] & mask[:, 2:]
    if dim == 2:
        free[0, :] = free[-1, :] = False
        free[1:-1, :] &= mask[:-2, :] & mask[2:, :]
    free.setflags(write=False)
    return free


def _active_cells(mask, dim):
    free = _free_nodes(mask, dim)
    if dim == 1:
        cells = free[:, :-1] | free[:, 1:]
    else:
        cells = free[:-1, :-1] | free[:-1, 1:] | free[1:, :-1] | free[1:, 1:]
    cells.setflags(write=False)
    return cells


def make_grid(domain_spec, resolution: int) -> Grid:
    """Uniform grid with ``resolution`` nodes per axis over [-1, 1]^d.

    The mask marks nodes inside the closed domain.
    """
    domain = parse_domain_spec(domain_spec)
    if int(resolution) != resolution or resolution < 3:
        raise InvalidParameter(f"resolution must be an integer >= 3, got {resolution!r}")
    n = int(resolution)
    h = 2.0 / (n - 1)
    if domain.dim == 1:
        grid = Grid(n, 1, h, h, np.ones((1, n), dtype=bool), domain)
    else:
        probe = Grid(n, n, h, h, np.ones((n, n), dtype=bool), domain)
        X, Y = probe.coords
        mask = domain.excess(X, Y) <= DOMAIN_TOL
        grid = Grid(n, n, h, h, mask, domain)
    if not grid.free.any():
        raise InvalidParameter(f"{domain} at resolution {n} has no interior nodes")
    return grid


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(self.grid.shape)
        outside = ~self.grid.mask
        v[outside & np.isnan(v)] = 0.0
        if np.any(v[outside] != 0.0):
            raise InvalidParameter("GridFunction must vanish outside the domain mask")
        if not np.all(np.isfinite(v)):
            raise InvalidParameter("GridFunction values must be finite inside the mask")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, fn, zero_trace=True) -> "GridFunction":
        """Sample ``fn(x, y)`` (or ``fn(x)`` on 1D grids) at masked nodes."""
        X, Y = grid.coords
        vals = np.asarray(fn(X) if grid.dim == 1 else fn(X, Y), dtype=float)
        vals = np.broadcast_to(vals, grid.shape)
        keep = grid.free if zero_trace else grid.mask
        return cls(grid, np.where(keep, vals, 0.0))

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls(grid, np.zeros(grid.shape))

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def is_zero_trace(self) -> bool:
        return not np.any(self.values[~self.grid.free])

    def project(self) -> "GridFunction":
        """Zero the boundary nodes (projection onto the zero-trace subspace)."""
        return self.with_values(np.where(self.grid.free, self.values, 0.0))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def dot(self, other: "GridFunction") -> float:
        """Discrete L2 pairing: nodearea-weighted node-wise product."""
        _same(self, other)
        return exact_sum(self.values * other.values) * self.grid.nodearea

    def l2(self) -> float:
        return math.sqrt(self.dot(self))

    def _combine(self, other, op):
        if isinstance(other, GridFunction):
            _same(self, other)
            other = other.values
        return self.with_values(op(self.values, other))

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar):
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def __repr__(self):
        return f"GridFunction({self.grid.nx}x{self.grid.ny}, max|u|={self.max_abs():.3g})"


def _same(u, v):
    if not u.grid.same_as(v.grid):
        raise InvalidParameter("grid mismatch between grid functions")


def _matrix_of(g):
    m = g.matrix if isinstance(g, GroupElement) else np.atleast_2d(np.asarray(g, dtype=float))
    return m


@functools.lru_cache(maxsize=4096)
def _lattice_map(grid: Grid, matrix_bytes: bytes, dim: int):
    """Source-node indices for a lattice-preserving matrix, or None.

    Returns flat indices (into the grid arrays) of the node each masked node
    reads from; -1 means the image falls outside the grid.
    """
    m = np.frombuffer(matrix_bytes, dtype=float).reshape(dim, dim)
    fi, fj = _fractional_indices(grid, m)
    ri, rj = np.rint(fi), np.rint(fj)
    if max(np.max(np.abs(fi - ri)), np.max(np.abs(fj - rj))) > LATTICE_TOL:
        return None
    ri, rj = ri.astype(int), rj.astype(int)
    inside = (ri >= 0) & (ri < grid.nx) & (rj >= 0) & (rj < grid.ny)
    src = np.where(inside, rj * grid.nx + ri, -1)
    src[~grid.mask] = -1
    src.setflags(write=False)
    return src


def _fractional_indices(grid, m):
    """Lattice coordinates of g x for every node x."""
    X, Y = grid.coords
    ox, oy = grid.origin
    if grid.dim == 1:
        return (m[0, 0] * X - ox) / grid.hx, np.zeros_like(X)
    px = m[0, 0] * X + m[0, 1] * Y
    py = m[1, 0] * X + m[1, 1] * Y
    return (px - ox) / grid.hx, (py - oy) / grid.hy


def is_grid_exact(g, grid: Grid) -> bool:
    m = _matrix_of(g)
    return _lattice_map(grid, np.ascontiguousarray(m).tobytes(), m.shape[0]) is not None


def _interpolate(values, fi, fj, dim):
    """(Bi)linear interpolation at fractional lattice coordinates, zero outside."""
    ny, nx = values.shape
    padded = np.zeros((ny + 2, nx + 2))
    padded[1:-1, 1:-1] = values
    # clip far-away points into the zero halo; they only ever read zeros
    fi = np.clip(fi, -1.0, nx)
    i0 = np.floor(fi)
    t = fi - i0
    i0 = i0.astype(int) + 1
    if dim == 1:
        row = padded[1]
        i1 = np.minimum(i0 + 1, nx + 1)
        return (1 - t) * row[i0] + t * row[i1]
    fj = np.clip(fj, -1.0, ny)
    j0 = np.floor(fj)
    s = fj - j0
    j0 = j0.astype(int) + 1
    i1 = np.minimum(i0 + 1, nx + 1)
    j1 = np.minimum(j0 + 1, ny + 1)
    return ((1 - t) * (1 - s)) * padded[j0, i0] + (t * (1 - s)) * padded[j0, i1] + (
        (1 - t) * s
    ) * padded[j1, i0] + (t * s) * padded[j1, i1]


def pullback(g, u: GridFunction) -> GridFunction:
    """(g.u)(x) = u(g x) at every masked node.

    Lattice-preserving elements take an exact gather path (a pure
    permutation of node values); all others use (bi)linear interpolation
    with zero extension outside the mask.
    """
    m = _matrix_of(g)
    grid = u.grid
    if m.shape[0] != grid.dim:
        raise InvalidParameter(f"{m.shape[0]}D group element on a {grid.dim}D grid")
    src = _lattice_map(grid, np.ascontiguousarray(m).tobytes(), m.shape[0])
    if src is not None:
        flat = np.append(u.values.ravel(), 0.0)
        out = flat[src]
    else:
        fi, fj = _fractional_indices(grid, m)
        out = _interpolate(u.values, fi, fj, grid.dim)
    return GridFunction(grid, np.where(grid.mask, out, 0.0))


# discrete operators ---------------------------------------------------------


def edge_differences(values, dim):
    """Per-cell edge differences: (bottom, top) in x and (left, right) in y."""
    if dim == 1:
        return (values[:, 1:] - values[:, :-1],), ()
    dxb = values[:-1, 1:] - values[:-1, :-1]
    dxt = values[1:, 1:] - values[1:, :-1]
    dyl = values[1:, :-1] - values[:-1, :-1]
    dyr = values[1:, 1:] - values[:-1, 1:]
    return (dxb, dxt), (dyl, dyr)


def cell_gradient_sq(values, grid: Grid):
    """|grad_h u|^2 per cell.

    x-part is the mean of the squared x-differences on the cell's two
    horizontal edges, likewise for y. The pairing ((x-pair) + (y-pair)) is
    invariant in floating point under the square's symmetries.
    """
    xs, ys = edge_differences(values, grid.dim)
    if grid.dim == 1:
        return (xs[0] * xs[0]) / (grid.hx * grid.hx)
    qx = (xs[0] * xs[0] + xs[1] * xs[1]) / (grid.hx * grid.hx)
    qy = (ys[0] * ys[0] + ys[1] * ys[1]) / (grid.hy * grid.hy)
    return (qx + qy) / 2


def laplacian(values, grid: Grid):
    """5-point (3-point in 1D) Laplacian with zero ghosts, restricted to the mask."""
    v = np.where(grid.mask, values, 0.0)
    p = np.pad(v, 1)
    c = p[1:-1, 1:-1]
    lap = ((p[1:-1, 2:] + p[1:-1, :-2]) - 2 * c) / (grid.hx * grid.hx)
    if grid.dim == 2:
        lap = lap + ((p[2:, 1:-1] + p[:-2, 1:-1]) - 2 * c) / (grid.hy * grid.hy)
    return np.where(grid.mask, lap, 0.0)


def poly_laplacian(values, grid: Grid, m: int):
    out = values
    for _ in range(m):
        out = laplacian(out, grid)
    return out


def sobolev_norm(u: GridFunction, p: float, order: int = 1) -> float:
    """Discrete W^{1,p} (order 1) or W^{2m,p}-type (order 2m) norm.

    order 1:  (sum_cells |grad_h u|^p * cellarea + sum_nodes |u|^p * nodearea)^(1/p)
    order 2m: the gradient term is replaced by |Laplacian_h^m u|^p over masked nodes.
    """
    if not p > 1:
        raise InvalidParameter(f"norm exponent must exceed 1, got {p!r}")
    grid = u.grid
    if order == 1:
        q = cell_gradient_sq(u.values, grid)[grid.active_cells]
        top = exact_sum(q ** (p / 2)) * grid.cellarea
    elif order >= 2 and order % 2 == 0:
        lap = poly_laplacian(u.values, grid, order // 2)[grid.mask]
        top = exact_sum(np.abs(lap) ** p) * grid.nodearea
    else:
        raise InvalidParameter(f"order must be 1 or an even integer, got {order!r}")
    low = exact_sum(np.abs(u.values[grid.mask]) ** p) * grid.nodearea
    return (top + low) ** (1.0 / p)


@dataclass
class DomainCheck:
    ok: bool
    worst_excess: float
    witness: tuple | None = None
    element: int | None = None

    def __bool__(self):
        return self.ok


def check_domain_invariance(G: SymmetryGroup, grid: Grid) -> DomainCheck:
    """Does every element map every masked node into the closed domain?"""
    if G.dim != grid.dim:
        raise InvalidParameter(f"{G.dim}D group on a {grid.dim}D grid")
    X, Y = grid.coords
    xs, ys = X[grid.mask], Y[grid.mask]
    worst, witness, worst_g = -np.inf, None, None
    for k, g in enumerate(G):
        m = g.matrix
        if grid.dim == 1:
            ex = np.asarray(grid.excess(m[0, 0] * xs, None))
        else:
            ex = np.asarray(grid.excess(m[0, 0] * xs + m[0, 1] * ys, m[1, 0] * xs + m[1, 1] * ys))
        i = int(np.argmax(ex))
        if ex[i] > worst:
            worst, worst_g = float(ex[i]), k
            witness = (float(xs[i]),) if grid.dim == 1 else (float(xs[i]), float(ys[i]))
    ok = worst <= DOMAIN_TOL
    return DomainCheck(ok, worst, None if ok else witness, None if ok else worst_g)


def require_invariant_domain(G: SymmetryGroup, grid: Grid) -> None:
    check = check_domain_invariance(G, grid)
    if not check.ok:
        raise InvariantDomainViolation(
            f"domain is not invariant under {G.describe()}: element {check.element} "
            f"moves node {check.witness} outside by {check.worst_excess:.3g}",
            witness=check.witness,
            element=check.element,
        )


def smooth(values, grid: Grid, passes: int):
    """Repeated 5-point (3-point in 1D) averaging with zero boundary."""
    v = np.where(grid.free, values, 0.0)
    for _ in range(passes):
        p = np.pad(v, 1)
        total = (p[1:-1, 2:] + p[1:-1, :-2]) + p[1:-1, 1:-1]
        if grid.dim == 2:
            total = total + (p[2:, 1:-1] + p[:-2, 1:-1])
        v = np.where(grid.free, total / (5 if grid.dim == 2 else 3), 0.0)
    return v


def random_field(grid: Grid, seed: int, smoothness: int = 0) -> GridFunction:
    """Seeded uniform(-1, 1) noise on free nodes, smoothed ``smoothness`` times."""
    if smoothness < 0:
        raise InvalidParameter("smoothness must be >= 0")
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-1.0, 1.0, size=grid.shape)
    return GridFunction(grid, smooth(noise, grid, int(smoothness)))
