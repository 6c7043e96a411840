"""Numerical probes: strong mean-value property, minors vs averaging, and
Lipschitz continuity of the group action."""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field
from math import comb

import numpy as np

from symmin.average import mean_value_distance_points, orbit, orbit_average
from symmin.errors import InvalidParameter
from symmin.field import Grid, GridFunction, pullback, require_invariant_domain, sobolev_norm
from symmin.group import GroupElement, SymmetryGroup, group_distance

SUPPORTED_SHAPES = (2, 3)


@dataclass
class ProbeReport:
    probe: str
    inputs: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    expectations: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.expectations.values())

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


# mean value ------------------------------------------------------------------


def mean_value_probe(u: GridFunction, G: SymmetryGroup):
    """Exhaustive search for g with u_G = g.u.

    Returns (closest element, weighted L2 distance ||u_G - g.u||). A zero
    distance certifies the strong mean-value property for this u.
    """
    require_invariant_domain(G, u.grid)
    area = u.grid.nodearea

    def norm(a):
        return float(np.sqrt(np.sum(a * a) * area))

    k, dist = mean_value_distance_points(orbit(u, G), G.weights, norm)
    return G[k], dist


# minors ----------------------------------------------------------------------


def tau(k: int, n: int) -> int:
    """Length of (xi, adj_2 xi, ..., adj_min(k,n) xi) for a k x n matrix."""
    if k < 1 or n < 1:
        raise InvalidParameter(f"tau needs positive dimensions, got ({k}, {n})")
    return sum(comb(k, s) * comb(n, s) for s in range(1, min(k, n) + 1))


def _det(m):
    # closed-form cofactor expansion; exact on small integer matrices, unlike LU
    s = m.shape[-1]
    if s == 2:
        return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    if s == 3:
        return (
            m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
            - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
            + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0])
        )
    return np.linalg.det(m)


def adjugate(xi, s: int) -> np.ndarray:
    """Matrix of all s x s minors, rows/columns in lexicographic subset order.

    Works on stacks: the last two axes hold the k x n matrix.
    """
    xi = np.asarray(xi, dtype=float)
    k, n = xi.shape[-2:]
    if not 2 <= s <= min(k, n):
        raise InvalidParameter(f"minor size {s} out of range for a {k}x{n} matrix")
    rows = list(itertools.combinations(range(k), s))
    cols = list(itertools.combinations(range(n), s))
    out = np.empty(xi.shape[:-2] + (len(rows), len(cols)))
    for a, I in enumerate(rows):
        sub = xi[..., list(I), :]
        for b, J in enumerate(cols):
            out[..., a, b] = _det(sub[..., :, list(J)])
    return out


def minors_vector(xi) -> np.ndarray:
    """T(xi) = (xi, adj_2 xi, ..., adj_min(k,n) xi) flattened; length tau(k, n)."""
    xi = np.asarray(xi, dtype=float)
    k, n = xi.shape[-2:]
    parts = [xi.reshape(xi.shape[:-2] + (-1,))]
    for s in range(2, min(k, n) + 1):
        a = adjugate(xi, s)
        parts.append(a.reshape(a.shape[:-2] + (-1,)))
    return np.concatenate(parts, axis=-1)


@dataclass(frozen=True, eq=False)
class MatrixField:
    """A k x n matrix per node (k, n in {2, 3})."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape[:2] != self.grid.shape or v.ndim != 4:
            raise InvalidParameter(f"matrix field must have shape {self.grid.shape} + (k, n)")
        k, n = v.shape[2:]
        if k not in SUPPORTED_SHAPES or n not in SUPPORTED_SHAPES:
            raise InvalidParameter(f"unsupported matrix shape {k}x{n}")
        if not np.all(np.isfinite(v)):
            raise InvalidParameter("matrix field entries must be finite")
        v[~self.grid.mask] = 0.0
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape[2:]


def random_matrix_field(grid: Grid, k: int, n: int, seed: int) -> MatrixField:
    rng = np.random.default_rng(seed)
    return MatrixField(grid, rng.uniform(-1.0, 1.0, size=grid.shape + (k, n)))


def _embed(g: GroupElement, n: int) -> np.ndarray:
    m = np.eye(n)
    d = g.dim
    m[:d, :d] = g.matrix
    return m


def transformed_field(Phi: MatrixField, g: GroupElement) -> np.ndarray:
    """Node values of Phi(g x) @ g, with g embedded block-diagonally in n x n."""
    k, n = Phi.shape
    moved = np.empty_like(Phi.values)
    for a in range(k):
        for b in range(n):
            entry = GridFunction(Phi.grid, Phi.values[..., a, b])
            moved[..., a, b] = pullback(g, entry).values
    return moved @ _embed(g, n)


def polyconvexity_gap_points(mats, weights, s: int) -> float:
    """sum over nodes of ||adj_s(avg Phi_g) - avg adj_s(Phi_g)||_F.

    ``mats`` stacks the orbit along axis 0; remaining leading axes are nodes.
    """
    mats = np.asarray(mats, dtype=float)
    avg = orbit_average(mats, weights)
    avg_adj = orbit_average(adjugate(mats, s), weights)
    diff = adjugate(avg, s) - avg_adj
    return float(np.sum(np.sqrt(np.sum(diff * diff, axis=(-2, -1)))))


def polyconvexity_gap(Phi: MatrixField, G: SymmetryGroup, s: int) -> float:
    k, n = Phi.shape
    if not 2 <= s <= min(k, n):
        raise InvalidParameter(f"minor size {s} invalid for {k}x{n} fields")
    require_invariant_domain(G, Phi.grid)
    mats = np.stack([transformed_field(Phi, g) for g in G])
    mask = Phi.grid.mask
    return polyconvexity_gap_points(mats[:, mask], G.weights, s)


# continuity of the action ----------------------------------------------------


@dataclass
class ContinuityEstimate:
    c_v: float
    pairs: int
    worst_pair: tuple | None
    min_distance: float


def action_continuity_probe(
    v: GridFunction, G: SymmetryGroup, pair_samples: int = 500, p: float = 2.0, seed: int = 0
) -> ContinuityEstimate:
    """max over element pairs of ||g1.v - g2.v||_{1,p} / d(g1, g2).

    All distinct pairs are used when there are at most ``pair_samples`` of
    them, otherwise a seeded sample of that size.
    """
    if G.order < 2:
        raise InvalidParameter("continuity probe needs at least two group elements")
    require_invariant_domain(G, v.grid)
    pairs = list(itertools.combinations(range(G.order), 2))
    if len(pairs) > pair_samples:
        rng = np.random.default_rng(seed)
        pick = rng.choice(len(pairs), size=pair_samples, replace=False)
        pairs = [pairs[i] for i in sorted(pick)]
    moved = [pullback(g, v) for g in G]
    best, worst_pair, dmin = 0.0, None, np.inf
    for i, j in pairs:
        d = group_distance(G[i], G[j])
        dmin = min(dmin, d)
        ratio = sobolev_norm(moved[i] - moved[j], p, 1) / d
        if ratio > best or worst_pair is None:
            best, worst_pair = ratio, (i, j)
    return ContinuityEstimate(best, len(pairs), worst_pair, float(dmin))
