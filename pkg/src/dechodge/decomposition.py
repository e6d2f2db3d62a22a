"""Orthogonal boundary-value Hodge decomposition of cochains.

Notation for subspace labels (all of degree p):

========  ===========================================================
cE_N      image of delta_{p+1} (co-exact with the weak Neumann condition)
E_D       image of d on cochains vanishing on the boundary
E         image of d
CcC       closed, and co-closed away from the boundary (M-complement of
          cE_N + E_D)
CcC_N     closed and co-closed, kernel of the Laplacian
CcC_D     harmonic fields of the Dirichlet subcomplex, extended by zero
EcC/CcE   complements of CcC_N / CcC_D inside CcC
C, cC     kernel of d / co-closed away from the boundary
cE        complement of CcC_D inside cC
========  ===========================================================

Computations run in M-orthonormal coordinates ``x~ = sqrt(M) x`` where the
codifferential becomes the plain transpose of the scaled coboundary.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import BettiMismatch, BoundaryRequired, DegreeOutOfRange
from .mesh import boundary_matrix, connected_components

LABELS = ("cE_N", "E_D", "CcC", "CcC_N", "CcC_D", "EcC", "CcE", "C", "cC", "E", "cE")


@dataclass
class SubspaceBasis:
    """M-orthonormal basis (columns) of a labelled subspace of p-cochains."""

    label: str
    degree: int
    columns: np.ndarray
    residuals: dict = field(default_factory=dict)

    @property
    def dimension(self):
        return self.columns.shape[1]

    def to_dict(self, include_columns=False):
        out = {
            "label": self.label,
            "degree": self.degree,
            "dimension": self.dimension,
            "residuals": {k: float(v) for k, v in self.residuals.items()},
        }
        if include_columns:
            out["columns"] = self.columns.T.tolist()
        return out

    def to_json(self, include_columns=False):
        return json.dumps(self.to_dict(include_columns), separators=(",", ":"))


@dataclass
class DecompositionResult:
    degree: int
    omega: np.ndarray
    coexact: np.ndarray  # cE_N part
    harmonic: np.ndarray  # CcC part
    exact: np.ndarray  # E_D part
    residual: float
    inner_products: dict
    norm: float
    component_norms: dict

    @property
    def components(self):
        return self.coexact, self.harmonic, self.exact

    def to_dict(self):
        return {
            "degree": self.degree,
            "norm": self.norm,
            "reconstruction_residual": self.residual,
            "inner_products": self.inner_products,
            "component_norms": self.component_norms,
            "components": {
                "cE_N": self.coexact.tolist(),
                "CcC": self.harmonic.tolist(),
                "E_D": self.exact.tolist(),
            },
        }


# -- Betti number oracle --------------------------------------------------------

def _betti_from_ranks(sizes, ranks):
    # ranks[k] = rank of the map from degree k to degree k+1
    n = len(sizes) - 1
    out = []
    for p in range(n + 1):
        r_out = ranks[p] if p < n else 0
        r_in = ranks[p - 1] if p > 0 else 0
        out.append(sizes[p] - r_out - r_in)
    return out


def betti_numbers(K, tol=None):
    """Absolute Betti numbers from ranks of the integer boundary matrices."""
    ranks = [linalg.rank(boundary_matrix(K, k + 1), tol).rank for k in range(K.dim)]
    return _betti_from_ranks(K.counts, ranks)


def relative_betti_numbers(K, tol=None):
    """Betti numbers of M relative to its boundary (Dirichlet subcomplex)."""
    keep = [~K.boundary_flag[p] for p in range(K.dim + 1)]
    ranks = []
    for k in range(K.dim):
        cob = boundary_matrix(K, k + 1).T.tocsr()[keep[k + 1]][:, keep[k]]
        ranks.append(linalg.rank(cob, tol).rank)
    return _betti_from_ranks([int(m.sum()) for m in keep], ranks)


def subcomplex_betti_numbers(K, masks, tol=None):
    """Betti numbers of the subcomplex selected by per-degree boolean masks.

    The masks must be closed under taking faces.
    """
    ranks = []
    for k in range(K.dim):
        cob = boundary_matrix(K, k + 1).T.tocsr()[masks[k + 1]][:, masks[k]]
        ranks.append(linalg.rank(cob, tol).rank if cob.shape[0] and cob.shape[1] else 0)
    return _betti_from_ranks([int(m.sum()) for m in masks], ranks)


def betti(K, p):
    if not 0 <= p <= K.dim:
        raise DegreeOutOfRange(f"degree {p} outside 0..{K.dim}")
    return betti_numbers(K)[p]


def betti_rel(K, p):
    if not 0 <= p <= K.dim:
        raise DegreeOutOfRange(f"degree {p} outside 0..{K.dim}")
    return relative_betti_numbers(K)[p]


def _cached_betti(ops, relative=False):
    key = ("betti", relative)
    if key not in ops._cache:
        fn = relative_betti_numbers if relative else betti_numbers
        ops._cache[key] = fn(ops.K)
    return ops._cache[key]


# -- scaled operator blocks ----------------------------------------------------

def _dense_scaled_d(chain, p):
    key = ("sd", p)
    if key not in chain._cache:
        chain._cache[key] = chain.scaled_d(p).toarray() if p >= 0 else None
    return chain._cache[key]


def _scaled_d_dirichlet_source(ops, p):
    """Scaled d_{p-1} restricted to Dirichlet (p-1)-cochains, as a map into all p-cochains."""
    key = ("sdD", p)
    if key not in ops._cache:
        if p == 0:
            mat = np.zeros((ops.size(0), 0))
        else:
            keep = np.flatnonzero(ops.dirichlet_free[p - 1])
            full = _dense_scaled_d(ops, p - 1)
            mat = full[:, keep]
        ops._cache[key] = mat
    return ops._cache[key]


def _stack(*blocks):
    blocks = [b for b in blocks if b is not None and b.shape[0]]
    if not blocks:
        return None
    scaled = []
    for b in blocks:
        nrm = np.linalg.norm(b)
        scaled.append(b / nrm if nrm > 0 else b)
    return np.vstack(scaled)


def _null(n, *blocks, tol=None):
    A = _stack(*blocks)
    if A is None:
        return np.eye(n)
    return linalg.rank_nullspace(A, tol)[1]


def _range(A, tol=None):
    if A.shape[1] == 0:
        return np.zeros((A.shape[0], 0))
    return linalg.range_basis(A, tol)[1]


def _complement_within(Q, Qsub, tol=None):
    """Orthonormal complement of span(Qsub) inside span(Q) (both orthonormal)."""
    if Qsub.shape[1] == 0 or Q.shape[1] == 0:
        return Q
    W = Qsub.T @ Q
    _, null = linalg.rank_nullspace(W, tol)
    return Q @ null


def _residuals(ops, p, cols):
    out = {}
    if cols.shape[1] == 0:
        return {"gram": 0.0}
    G = linalg.m_gram(cols, cols, ops.star[p])
    out["gram"] = float(np.max(np.abs(G - np.eye(G.shape[0]))))

    def mnorm(deg, v):
        return np.sqrt(np.einsum("ij,i,ij->j", v, ops.star[deg], v)) if v.shape[0] else np.zeros(v.shape[1])

    if p < ops.dim:
        out["d"] = float(np.max(mnorm(p + 1, ops.d[p] @ cols)))
    if p > 0:
        dv = ops.delta(p) @ cols
        out["delta"] = float(np.max(mnorm(p - 1, dv)))
        free = ops.dirichlet_free[p - 1]
        out["delta_free"] = float(np.max(np.abs(dv[free]))) if free.any() else 0.0
    bnd = ~ops.dirichlet_free[p]
    out["tangential"] = float(np.max(np.abs(cols[bnd]))) if bnd.any() else 0.0
    return out


def _scaled_basis(ops, p, label):
    """Orthonormal basis in scaled coordinates, cached per (label, degree)."""
    key = ("basis", label, p)
    if key in ops._cache:
        return ops._cache[key]
    n = ops.size(p)
    Dp = _dense_scaled_d(ops, p)
    Dm = _dense_scaled_d(ops, p - 1) if p > 0 else None
    B = _scaled_d_dirichlet_source(ops, p)
    if label == "cE_N":
        Q = _range(Dp.T)
    elif label == "E_D":
        Q = _range(B)
    elif label == "E":
        Q = _range(Dm) if Dm is not None else np.zeros((n, 0))
    elif label == "C":
        Q = _null(n, Dp)
    elif label == "cC":
        Q = _null(n, B.T if B.shape[1] else None)
    elif label == "CcC":
        Q = _null(n, Dp, B.T if B.shape[1] else None)
    elif label == "CcC_N":
        Q = _null(n, Dp, Dm.T if Dm is not None else None)
    elif label == "CcC_D":
        D = ops.dirichlet()
        nd = D.size(p)
        Dd = D.scaled_d(p).toarray()
        Ddm = D.scaled_d(p - 1).toarray() if p > 0 else None
        Qd = _null(nd, Dd, Ddm.T if Ddm is not None else None) if nd else np.zeros((0, 0))
        Q = D.extend(p, Qd) if nd else np.zeros((n, 0))
    elif label == "EcC":
        Q = _complement_within(_scaled_basis(ops, p, "CcC"), _scaled_basis(ops, p, "CcC_N"))
    elif label == "CcE":
        Q = _complement_within(_scaled_basis(ops, p, "CcC"), _scaled_basis(ops, p, "CcC_D"))
    elif label == "cE":
        Q = _complement_within(_scaled_basis(ops, p, "cC"), _scaled_basis(ops, p, "CcC_D"))
    else:
        raise ValueError(f"unknown subspace label {label!r}")
    ops._cache[key] = Q
    return Q


def basis(ops, p, label):
    """:class:`SubspaceBasis` for ``label`` in degree ``p``."""
    if not 0 <= p <= ops.dim:
        raise DegreeOutOfRange(f"degree {p} outside 0..{ops.dim}")
    Q = _scaled_basis(ops, p, label)
    cols = Q / ops.sqrt_star(p)[:, None]
    sb = SubspaceBasis(label, p, cols, _residuals(ops, p, cols))
    if label == "CcC_N" and sb.dimension != _cached_betti(ops)[p]:
        raise BettiMismatch(
            f"dim ker Laplacian_{p} = {sb.dimension} but b_{p} = {_cached_betti(ops)[p]}"
        )
    if label == "CcC_D" and sb.dimension != _cached_betti(ops, relative=True)[p]:
        raise BettiMismatch(
            f"dim ker Dirichlet Laplacian_{p} = {sb.dimension} "
            f"but relative b_{p} = {_cached_betti(ops, relative=True)[p]}"
        )
    return sb


def basis_CcC(ops, p):
    return basis(ops, p, "CcC")


def basis_CcC_N(ops, p):
    return basis(ops, p, "CcC_N")


def basis_CcC_D(ops, p):
    return basis(ops, p, "CcC_D")


def basis_EcC(ops, p):
    return basis(ops, p, "EcC")


def basis_CcE(ops, p):
    return basis(ops, p, "CcE")


def dimensions(ops, p):
    """Integer dimension bookkeeping for degree ``p`` (ranks computed separately)."""
    Dp = _dense_scaled_d(ops, p)
    B = _scaled_d_dirichlet_source(ops, p)
    out = {
        "N": ops.size(p),
        "rank_delta_next": linalg.rank(Dp).rank if Dp.shape[0] else 0,
        "rank_d_dirichlet": linalg.rank(B).rank if B.shape[1] else 0,
        "rank_d_prev": linalg.rank(_dense_scaled_d(ops, p - 1)).rank if p > 0 else 0,
        "nullity_d": ops.size(p) - (linalg.rank(Dp).rank if Dp.shape[0] else 0),
    }
    for label in LABELS:
        out["dim_" + label] = _scaled_basis(ops, p, label).shape[1]
    out["betti"] = _cached_betti(ops)[p]
    out["betti_rel"] = _cached_betti(ops, relative=True)[p]
    return out


# -- three-way splitting ---------------------------------------------------------------

def hodge_split(ops, omega):
    """Split a p-cochain into its cE_N, CcC and E_D components.

    Each component is an independent M-orthogonal projection, so the
    reconstruction residual measures completeness of the three subspaces.
    """
    from .operators import Cochain

    if isinstance(omega, Cochain):
        p, w = omega.degree, omega.values
    else:
        raise TypeError("hodge_split expects a Cochain")
    if not 0 <= p <= ops.dim or len(w) != ops.size(p):
        raise DegreeOutOfRange(f"cochain of degree {p} does not fit this complex")
    s = ops.sqrt_star(p)
    wt = s * w
    parts = []
    for label in ("cE_N", "CcC", "E_D"):
        Q = _scaled_basis(ops, p, label)
        parts.append((Q @ (Q.T @ wt)) / s)
    c1, c2, c3 = parts
    norm = ops.norm(p, w)
    res = ops.norm(p, w - c1 - c2 - c3)
    ips = {
        "cE_N.CcC": ops.inner(p, c1, c2),
        "cE_N.E_D": ops.inner(p, c1, c3),
        "CcC.E_D": ops.inner(p, c2, c3),
    }
    norms = {"cE_N": ops.norm(p, c1), "CcC": ops.norm(p, c2), "E_D": ops.norm(p, c3)}
    return DecompositionResult(p, w, c1, c2, c3, res, ips, norm, norms)


def lemma2_check(ops, p, tol=1e-6):
    """Closed, co-closed cochains vanishing on the boundary must be zero.

    Returns ``(holds, diagnostics)`` where ``holds`` means the Neumann and
    Dirichlet harmonic fields intersect trivially.
    """
    if not ops.has_boundary:
        raise BoundaryRequired("the vanishing statement needs a non-empty boundary")
    if connected_components(ops.K) != 1:
        raise BoundaryRequired("the complex must be connected")
    N = basis_CcC_N(ops, p)
    D = basis_CcC_D(ops, p)
    inter, cos = linalg.intersect_subspaces(N.columns, D.columns, ops.star[p], tol)
    diag = {
        "degree": p,
        "dim_CcC_N": N.dimension,
        "dim_CcC_D": D.dimension,
        "intersection_dim": inter.shape[1],
        "max_cosine": float(cos.max()) if len(cos) else 0.0,
    }
    return inter.shape[1] == 0, diag
