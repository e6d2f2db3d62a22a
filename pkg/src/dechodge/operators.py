"""Coboundary, diagonal Hodge stars, codifferential, Laplacian, de Rham map."""

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import geometry
from .errors import DegreeMismatch, DegreeOutOfRange, EvalError, NegativeDualVolume
from .mesh import boundary_matrix

STAR_SCHEMES = ("circumcentric", "barycentric")


@dataclass
class Cochain:
    """One real value per oriented p-simplex (sorted-vertex orientation)."""

    degree: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def to_dict(self):
        return {"degree": self.degree, "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(int(data["degree"]), np.array(data["values"], dtype=float))

    def to_json(self):
        return json.dumps(self.to_dict(), separators=(",", ":"))


class ChainOperators:
    """Coboundaries plus diagonal mass matrices for one cochain complex.

    ``d[p]`` maps degree p to p+1; ``star[p]`` holds the diagonal of the
    mass matrix M_p.  The codifferential is the exact M-adjoint
    ``delta_p = M_{p-1}^{-1} d_{p-1}^T M_p``.
    """

    def __init__(self, d, star):
        self.d = list(d)
        self.star = [np.asarray(s, dtype=float) for s in star]
        self.dim = len(self.star) - 1
        self._cache = {}

    def size(self, p):
        return len(self.star[p])

    def _degree(self, p):
        if not 0 <= p <= self.dim:
            raise DegreeOutOfRange(f"degree {p} outside 0..{self.dim}")

    def coboundary(self, p):
        """d_p as a sparse matrix; the zero map (0 rows) for p = n."""
        self._degree(p)
        if p == self.dim:
            return sp.csr_matrix((0, self.size(p)))
        return self.d[p]

    def delta(self, p):
        """delta_p : C^p -> C^{p-1}; the zero map (0 rows) for p = 0."""
        self._degree(p)
        key = ("delta", p)
        if key not in self._cache:
            if p == 0:
                mat = sp.csr_matrix((0, self.size(0)))
            else:
                mat = sp.diags(1.0 / self.star[p - 1]) @ self.d[p - 1].T @ sp.diags(self.star[p])
            self._cache[key] = sp.csr_matrix(mat)
        return self._cache[key]

    def laplacian(self, p):
        self._degree(p)
        key = ("lap", p)
        if key not in self._cache:
            mat = sp.csr_matrix((self.size(p), self.size(p)))
            if p < self.dim:
                mat = mat + self.delta(p + 1) @ self.d[p]
            if p > 0:
                mat = mat + self.d[p - 1] @ self.delta(p)
            self._cache[key] = sp.csr_matrix(mat)
        return self._cache[key]

    def sqrt_star(self, p):
        return np.sqrt(self.star[p])

    def scaled(self, mat, row_degree, col_degree):
        """``S_row mat S_col^{-1}`` with S = sqrt(M): the operator in M-orthonormal coordinates."""
        return sp.diags(self.sqrt_star(row_degree)) @ mat @ sp.diags(1.0 / self.sqrt_star(col_degree))

    def scaled_d(self, p):
        """d_p in M-orthonormal coordinates; its transpose is scaled delta_{p+1}."""
        if p == self.dim:
            return sp.csr_matrix((0, self.size(p)))
        return self.scaled(self.d[p], p + 1, p)

    def inner(self, p, a, b):
        return float(np.dot(a, self.star[p] * b))

    def norm(self, p, a):
        return float(np.sqrt(max(self.inner(p, a, a), 0.0)))


class OperatorSet(ChainOperators):
    """All operators of a complex plus the row selections used downstream.

    ``dirichlet_free[p]``: p-simplices not contained in the boundary.
    ``interior[p]``: simplices whose closed star avoids the boundary.
    ``core[p]``: simplices with no boundary vertex (a subcomplex).
    """

    def __init__(self, K, d, star, primal, dual, scheme):
        super().__init__(d, star)
        self.K = K
        self.scheme = scheme
        self.primal_volume = primal
        self.dual_volume = dual
        self.dirichlet_free = [~K.boundary_flag[p] for p in range(K.dim + 1)]
        self.interior = list(K.strict_interior_flag)
        self.core = list(K.core_flag)
        self._dirichlet = None

    @property
    def has_boundary(self):
        return self.K.has_boundary

    def dirichlet(self):
        if self._dirichlet is None:
            self._dirichlet = dirichlet_subcomplex(self)
        return self._dirichlet


class DirichletOperators(ChainOperators):
    """The subcomplex of cochains vanishing on boundary simplices.

    Cochains here are indexed by ``keep[p]`` (positions in the full complex);
    ``extend``/``restrict`` convert to and from full-length arrays.
    """

    def __init__(self, parent, keep):
        self.parent = parent
        self.keep = keep
        d = [parent.d[p][keep[p + 1]][:, keep[p]] for p in range(parent.dim)]
        star = [parent.star[p][keep[p]] for p in range(parent.dim + 1)]
        super().__init__([sp.csr_matrix(m) for m in d], star)
        K = parent.K
        self.interior = [K.strict_interior_flag[p][keep[p]] for p in range(parent.dim + 1)]

    def extend(self, p, values):
        values = np.asarray(values)
        out = np.zeros((self.parent.size(p),) + values.shape[1:])
        out[self.keep[p]] = values
        return out

    def restrict(self, p, values):
        return np.asarray(values)[self.keep[p]]


def assemble(K, star_scheme="circumcentric"):
    """Build d, M, delta and Laplacian for every degree of ``K``."""
    if star_scheme not in STAR_SCHEMES:
        raise ValueError(f"star scheme must be one of {STAR_SCHEMES}")
    dual = geometry.dual_volumes(K.vertices, K.simplices, star_scheme)
    primal = geometry.primal_volumes(K.vertices, K.simplices)
    for p in range(K.dim + 1):
        bad = np.flatnonzero(dual[p] <= 0)
        if len(bad):
            raise NegativeDualVolume(
                f"{len(bad)} nonpositive dual volumes in degree {p} "
                f"(min {dual[p].min():.3e}); retry with the barycentric star"
            )
    star = [dual[p] / primal[p] for p in range(K.dim + 1)]
    d = [sp.csr_matrix(boundary_matrix(K, p + 1).T.astype(float)) for p in range(K.dim)]
    return OperatorSet(K, d, star, primal, dual, star_scheme)


def dirichlet_subcomplex(ops):
    """Restriction of ``ops`` to cochains vanishing on the boundary subcomplex."""
    keep = [np.flatnonzero(ops.dirichlet_free[p]) for p in range(ops.dim + 1)]
    return DirichletOperators(ops, keep)


def _as_values(ops, omega, p=None):
    if isinstance(omega, Cochain):
        if p is not None and omega.degree != p:
            raise DegreeMismatch(f"expected degree {p}, got {omega.degree}")
        return omega.degree, omega.values
    raise TypeError("expected a Cochain")


def _check_length(ops, p, values):
    if not 0 <= p <= ops.dim:
        raise DegreeMismatch(f"degree {p} outside 0..{ops.dim}")
    if len(values) != ops.size(p):
        raise DegreeMismatch(f"degree-{p} cochain needs {ops.size(p)} values, got {len(values)}")


def apply_d(ops, omega):
    p, values = _as_values(ops, omega)
    _check_length(ops, p, values)
    if p == ops.dim:
        raise DegreeMismatch(f"d of a top-degree ({p}) cochain is not defined")
    return Cochain(p + 1, ops.d[p] @ values)


def apply_delta(ops, omega):
    p, values = _as_values(ops, omega)
    _check_length(ops, p, values)
    if p == 0:
        raise DegreeMismatch("delta is not defined on 0-cochains")
    return Cochain(p - 1, ops.delta(p) @ values)


def apply_laplacian(ops, omega):
    p, values = _as_values(ops, omega)
    _check_length(ops, p, values)
    return Cochain(p, ops.laplacian(p) @ values)


# -- de Rham map ----------------------------------------------------------------

_TRI_RULES = {
    3: (
        np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
        np.full(3, 1 / 3),
    ),
    7: (
        np.array([
            [1 / 3, 1 / 3, 1 / 3],
            [0.059715871789770, 0.470142064105115, 0.470142064105115],
            [0.470142064105115, 0.059715871789770, 0.470142064105115],
            [0.470142064105115, 0.470142064105115, 0.059715871789770],
            [0.797426985353087, 0.101286507323456, 0.101286507323456],
            [0.101286507323456, 0.797426985353087, 0.101286507323456],
            [0.101286507323456, 0.101286507323456, 0.797426985353087],
        ]),
        np.array([0.225, 0.132394152788506, 0.132394152788506, 0.132394152788506,
                  0.125939180544827, 0.125939180544827, 0.125939180544827]),
    ),
}


def _evaluate(form, points):
    try:
        with np.errstate(all="raise"):
            out = np.asarray(form(points), dtype=float)
    except (FloatingPointError, ValueError, ZeroDivisionError) as exc:
        raise EvalError(f"form evaluation failed: {exc}") from exc
    if not np.all(np.isfinite(out)):
        raise EvalError("form evaluation produced non-finite values")
    return out


def de_rham_map(K, form, p, edge_points=4, tri_rule=3):
    """Integrate a smooth p-form over every oriented p-simplex of ``K``.

    ``form(points)`` receives an ``(m, ambient)`` array and returns, for
    p = 0, the function values ``(m,)``; for p = 1, covector components
    ``(m, ambient)``; for p = 2 (planar meshes only), the coefficient of
    ``dx^dy`` ``(m,)``.  Edges use Gauss-Legendre with ``edge_points`` nodes,
    triangles the symmetric ``tri_rule``-point rule (3 or 7).
    """
    if not 0 <= p <= min(K.dim, 2):
        raise DegreeOutOfRange(f"de Rham map supports degrees 0..{min(K.dim, 2)}")
    X = K.vertices
    if p == 0:
        return Cochain(0, _evaluate(form, X).reshape(-1))
    simp = K.simplices[p]
    if p == 1:
        nodes, weights = np.polynomial.legendre.leggauss(edge_points)
        t = 0.5 * (nodes + 1.0)
        w = 0.5 * weights
        a, b = X[simp[:, 0]], X[simp[:, 1]]
        pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
        vals = _evaluate(form, pts.reshape(-1, X.shape[1])).reshape(len(simp), len(t), X.shape[1])
        return Cochain(1, np.einsum("q,eqd,ed->e", w, vals, b - a))
    if X.shape[1] != 2:
        raise EvalError("2-form integration needs a planar mesh")
    bary, w = _TRI_RULES[tri_rule]
    tri = X[simp]
    pts = np.einsum("qi,tid->tqd", bary, tri)
    vals = _evaluate(form, pts.reshape(-1, 2)).reshape(len(simp), len(w))
    e1, e2 = tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]
    signed_area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return Cochain(2, signed_area * (vals @ w))
