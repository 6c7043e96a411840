"""Compact symmetry groups as finite lists of orthogonal matrices with Haar weights.

Continuous SO(2) is represented by the cyclic group C_N of rotations by
2*pi*k/N. Uniform weights on C_N are exactly its Haar measure, and the
weighted sum converges to the SO(2) Haar integral of a continuous
integrand as N grows; the ``kind`` tag records which reading applies.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from symmin.errors import InvalidParameter

ORTHO_TOL = 1e-12
WEIGHT_TOL = 1e-12
MATCH_TOL = 1e-9
DEFAULT_SO2_NODES = 32


def _snap(matrix):
    # cos(pi/2) etc. come out as 6e-17; snap so quarter turns are integer matrices
    m = np.array(matrix, dtype=float)
    for target in (-1.0, 0.0, 1.0):
        m[np.abs(m - target) < 1e-15] = target
    return m


@dataclass(frozen=True, eq=False)
class GroupElement:
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (1, 2):
            raise InvalidParameter(f"group element must be 1x1 or 2x2, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.matrix @ other.matrix)

    def inverse(self) -> "GroupElement":
        return GroupElement(self.matrix.T.copy())

    def is_identity(self, tol=MATCH_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix - np.eye(self.dim))) <= tol)

    def __repr__(self):
        name = self.label or "g"
        return f"{name}{self.matrix.round(6).tolist()}"


@dataclass(frozen=True, eq=False)
class SymmetryGroup:
    elements: tuple
    weights: np.ndarray
    kind: str = "finite"
    name: str = ""

    def __post_init__(self):
        elements = tuple(self.elements)
        if not elements:
            raise InvalidParameter("group needs at least one element")
        dims = {g.dim for g in elements}
        if len(dims) != 1:
            raise InvalidParameter(f"mixed element dimensions {sorted(dims)}")
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != len(elements):
            raise InvalidParameter(f"{len(elements)} elements but {w.shape[0]} weights")
        if self.kind not in ("finite", "so2-quadrature"):
            raise InvalidParameter(f"unknown group kind {self.kind!r}")
        w.setflags(write=False)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.elements[0].dim

    @property
    def order(self) -> int:
        return len(self.elements)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, i):
        return self.elements[i]

    def matrices(self) -> np.ndarray:
        return np.stack([g.matrix for g in self.elements])

    def index_of(self, matrix, tol=MATCH_TOL):
        """Index of the listed element matching ``matrix`` entrywise, or None."""
        diffs = np.max(np.abs(self.matrices() - np.asarray(matrix)), axis=(1, 2))
        i = int(np.argmin(diffs))
        return i if diffs[i] <= tol else None

    def identity_index(self):
        return self.index_of(np.eye(self.dim))

    def cayley_table(self, tol=MATCH_TOL) -> np.ndarray:
        """table[i, j] = index of elements[i] @ elements[j]; -1 where no match."""
        n = self.order
        table = np.full((n, n), -1, dtype=int)
        for i, j in itertools.product(range(n), repeat=2):
            k = self.index_of(self.elements[i].matrix @ self.elements[j].matrix, tol)
            if k is not None:
                table[i, j] = k
        return table

    def describe(self) -> str:
        return self.name or f"{self.kind}[{self.order}]"


def rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return _snap([[c, -s], [s, c]])


def reflection(axis_angle: float) -> np.ndarray:
    """Reflection across the line through the origin at ``axis_angle``."""
    c, s = np.cos(2 * axis_angle), np.sin(2 * axis_angle)
    return _snap([[c, s], [s, -c]])


def _check_order(n, what):
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidParameter(f"{what} must be a positive integer, got {n!r}")
    return int(n)


def _uniform(elements, kind, name):
    n = len(elements)
    return SymmetryGroup(tuple(elements), np.full(n, 1.0 / n), kind=kind, name=name)


def make_cyclic(n: int) -> SymmetryGroup:
    n = _check_order(n, "cyclic order")
    elements = [GroupElement(rotation(2 * np.pi * k / n), f"r{k}") for k in range(n)]
    return _uniform(elements, "finite", f"cyclic:{n}")


def make_dihedral(n: int) -> SymmetryGroup:
    """D_n: n rotations followed by n reflections (axes at angles pi*j/n)."""
    n = _check_order(n, "dihedral order")
    rots = [GroupElement(rotation(2 * np.pi * k / n), f"r{k}") for k in range(n)]
    refs = [GroupElement(reflection(np.pi * j / n), f"s{j}") for j in range(n)]
    return _uniform(rots + refs, "finite", f"dihedral:{n}")


def make_reflection_1d() -> SymmetryGroup:
    elements = [GroupElement([[1.0]], "e"), GroupElement([[-1.0]], "s")]
    return _uniform(elements, "finite", "reflect1d")


def make_so2_quadrature(n_nodes: int = DEFAULT_SO2_NODES) -> SymmetryGroup:
    n = _check_order(n_nodes, "quadrature node count")
    elements = [GroupElement(rotation(2 * np.pi * k / n), f"r{k}") for k in range(n)]
    return _uniform(elements, "so2-quadrature", f"so2:{n}")


@dataclass
class Violation:
    check: str
    magnitude: float
    detail: str = ""


@dataclass
class GroupReport:
    group: str
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def verify_group(G: SymmetryGroup) -> GroupReport:
    """Check Haar-weight normalization, orthogonality, and closure.

    An empty report means every invariant holds. Closure and inverse
    checks use MATCH_TOL for element matching; orthogonality and
    normalization use 1e-12.
    """
    report = GroupReport(G.describe())
    add = report.violations.append
    w = G.weights
    total = float(w.sum())
    if abs(total - 1.0) > WEIGHT_TOL:
        add(Violation("normalization", abs(total - 1.0), f"weights sum to {total!r}"))
    if np.any(w <= 0):
        add(Violation("positivity", float(-w.min()), "nonpositive weight"))
    spread = float(w.max() - w.min())
    if spread > WEIGHT_TOL:
        add(Violation("uniform-weights", spread, "Haar weights on a finite group are uniform"))

    eye = np.eye(G.dim)
    for i, g in enumerate(G.elements):
        m = g.matrix
        err = float(np.max(np.abs(m.T @ m - eye)))
        if err > ORTHO_TOL:
            add(Violation("orthogonality", err, f"element {i}"))
        det_err = abs(abs(float(np.linalg.det(m))) - 1.0)
        if det_err > ORTHO_TOL:
            add(Violation("determinant", det_err, f"element {i}"))

    mats = G.matrices()
    for (i, a), (j, b) in itertools.product(enumerate(mats), repeat=2):
        miss = float(np.min(np.max(np.abs(mats - a @ b), axis=(1, 2))))
        if miss > MATCH_TOL:
            add(Violation("closure", miss, f"element {i} * element {j} not in group"))
    for i, a in enumerate(mats):
        miss = float(np.min(np.max(np.abs(mats - a.T), axis=(1, 2))))
        if miss > MATCH_TOL:
            add(Violation("inverse", miss, f"inverse of element {i} not in group"))
    if G.identity_index() is None:
        add(Violation("identity", 1.0, "identity not in group"))
    return report


def group_distance(g1: GroupElement, g2: GroupElement) -> float:
    """Frobenius distance between two group elements."""
    if g1.dim != g2.dim:
        raise InvalidParameter(f"dimension mismatch: {g1.dim} vs {g2.dim}")
    return float(np.linalg.norm(g1.matrix - g2.matrix))


def parse_group_spec(spec: str) -> SymmetryGroup:
    """Parse ``cyclic:n``, ``dihedral:n``, ``reflect1d``, ``so2:N`` (or bare ``so2``)."""
    text = spec.strip().lower()
    name, _, arg = text.partition(":")
    if name == "reflect1d" and not arg:
        return make_reflection_1d()
    if name == "so2" and not arg:
        return make_so2_quadrature()
    builders = {"cyclic": make_cyclic, "dihedral": make_dihedral, "so2": make_so2_quadrature}
    if name not in builders:
        raise InvalidParameter(f"unknown group spec {spec!r}")
    try:
        n = int(arg)
    except ValueError:
        raise InvalidParameter(f"group spec {spec!r} needs an integer order") from None
    return builders[name](n)
