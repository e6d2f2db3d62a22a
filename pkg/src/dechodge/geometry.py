"""Primal volumes, circumcenters and signed dual volumes of embedded simplices."""

from itertools import permutations
from math import factorial

import numpy as np


def simplex_volume(points):
    """Unsigned k-volume of the simplex spanned by the rows of ``points``."""
    points = np.asarray(points, dtype=float)
    k = points.shape[0] - 1
    if k == 0:
        return 1.0
    edges = points[1:] - points[0]
    gram = edges @ edges.T
    return float(np.sqrt(max(np.linalg.det(gram), 0.0)) / factorial(k))


def circumcenter_barycentric(points):
    """Barycentric coordinates of the circumcenter within the affine span.

    Solves the bordered system for the point equidistant from all vertices
    that lies in the affine hull, so it works for any ambient dimension.
    """
    points = np.asarray(points, dtype=float)
    m = points.shape[0]
    if m == 1:
        return np.ones(1)
    mat = np.zeros((m + 1, m + 1))
    mat[:m, :m] = 2.0 * points @ points.T
    mat[:m, m] = 1.0
    mat[m, :m] = 1.0
    rhs = np.zeros(m + 1)
    rhs[:m] = np.einsum("ij,ij->i", points, points)
    rhs[m] = 1.0
    sol = np.linalg.solve(mat, rhs)
    return sol[:m]


def _center(points, scheme):
    if scheme == "circumcentric":
        bary = circumcenter_barycentric(points)
    else:
        bary = np.full(len(points), 1.0 / len(points))
    return bary, bary @ points


def dual_volumes(vertices, simplices, scheme="circumcentric"):
    """Signed dual-cell volumes for every simplex of every degree.

    The dual of a k-simplex is assembled from elementary simplices spanned by
    the centers of a flag ``s_k < s_{k+1} < ... < s_n``.  With the
    circumcentric scheme each piece carries the product of signs telling
    whether the circumcenter of ``s_{j+1}`` sits on the same side of ``s_j``
    as the remaining vertex; the barycentric scheme is unsigned.

    Returns a list ``dual[k]`` of arrays aligned with ``simplices[k]``.
    """
    if scheme not in ("circumcentric", "barycentric"):
        raise ValueError(f"unknown star scheme {scheme!r}")
    vertices = np.asarray(vertices, dtype=float)
    n = len(simplices) - 1
    index = [{tuple(s): i for i, s in enumerate(simp)} for simp in simplices]
    dual = [np.zeros(len(simp)) for simp in simplices]
    cache = {}

    def center(face):
        if face not in cache:
            cache[face] = _center(vertices[list(face)], scheme)
        return cache[face]

    for top in simplices[n]:
        top = tuple(int(v) for v in top)
        for perm in permutations(top):
            # prefixes of perm form a full flag; tails from degree k upward
            chain = [tuple(sorted(perm[: j + 1])) for j in range(n + 1)]
            signs = np.ones(n + 1)
            for j in range(n - 1, -1, -1):
                upper = chain[j + 1]
                bary, _ = center(upper)
                added = perm[j + 1]
                s = 1.0
                if scheme == "circumcentric":
                    s = float(np.sign(bary[upper.index(added)]))
                signs[j] = signs[j + 1] * s
            for k in range(n + 1):
                if list(perm[: k + 1]) != sorted(perm[: k + 1]):
                    continue
                pts = np.array([center(chain[j])[1] for j in range(k, n + 1)])
                dual[k][index[k][chain[k]]] += signs[k] * simplex_volume(pts)
    return dual


def primal_volumes(vertices, simplices):
    vertices = np.asarray(vertices, dtype=float)
    return [
        np.array([simplex_volume(vertices[list(s)]) for s in simp])
        for simp in simplices
    ]


def min_angle(vertices, triangles):
    """Smallest interior angle (radians) over a list of triangles."""
    vertices = np.asarray(vertices, dtype=float)
    best = np.pi
    for tri in triangles:
        p = vertices[list(tri)]
        for i in range(3):
            u = p[(i + 1) % 3] - p[i]
            v = p[(i + 2) % 3] - p[i]
            c = np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
            best = min(best, float(np.arccos(np.clip(c, -1.0, 1.0))))
    return best
