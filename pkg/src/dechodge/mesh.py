"""Oriented simplicial complexes: construction, generators, file I/O, validation."""

import json
from collections import deque
from itertools import combinations
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.spatial import Delaunay

from . import geometry
from .errors import (
    BadParams,
    DegreeOutOfRange,
    NonManifold,
    NonOrientable,
    ParseError,
    StarFailure,
)

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
SHAPES = ("interval", "circle", "disk", "rectangle", "annulus", "sphere", "torus")


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


class SimplicialComplex:
    """A pure n-dimensional simplicial complex embedded in Euclidean space.

    Every k-simplex is stored as a sorted vertex tuple; its reference
    orientation is that vertex order, and incidence signs in the boundary
    matrices are permutation signs.  ``orientation`` holds, for each top
    simplex, the sign relating its sorted order to a globally consistent
    orientation (``None`` if none exists).

    Construction never raises on topological defects; call :func:`validate`
    to obtain the findings.  Index errors raise :class:`ParseError`.
    """

    def __init__(self, vertices, cells):
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim != 2 or len(vertices) == 0:
            raise ParseError("vertices must be a non-empty 2-D array")
        if not np.all(np.isfinite(vertices)):
            raise ParseError("non-finite vertex coordinate")
        try:
            cells = np.asarray(cells, dtype=np.int64)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad cell list: {exc}") from exc
        if cells.ndim != 2 or len(cells) == 0:
            raise ParseError("cells must be a non-empty 2-D integer array")
        n = cells.shape[1] - 1
        if not 1 <= n <= 3:
            raise ParseError(f"unsupported dimension {n}")
        if cells.min() < 0 or cells.max() >= len(vertices):
            raise ParseError("cell vertex index out of range")
        cells = np.sort(cells, axis=1)
        if np.any(np.diff(cells, axis=1) == 0):
            raise ParseError("degenerate cell with repeated vertex")

        self.vertices = _frozen(vertices)
        self.dim = n
        self.duplicate_cells = len(cells) - len(np.unique(cells, axis=0))
        top = np.unique(cells, axis=0)

        simplices = [None] * (n + 1)
        simplices[n] = top
        for k in range(n - 1, 0, -1):
            faces = {f for s in top for f in combinations(s.tolist(), k + 1)}
            simplices[k] = np.array(sorted(faces), dtype=np.int64)
        used = np.unique(top)
        self.isolated_vertices = int(len(vertices) - len(used))
        simplices[0] = np.arange(len(vertices), dtype=np.int64)[:, None]
        self.simplices = tuple(_frozen(s) for s in simplices)
        self._index = [None] * (n + 1)

        self.coface_count = self._facet_coface_counts()
        self.boundary_flag = self._boundary_flags()
        self.strict_interior_flag, self.core_flag = self._interior_flags()
        self.orientation = self._orient()

    # -- lookups -----------------------------------------------------------
    def index(self, k):
        """Dict from sorted vertex tuple to row index among k-simplices."""
        if self._index[k] is None:
            self._index[k] = {tuple(s): i for i, s in enumerate(self.simplices[k].tolist())}
        return self._index[k]

    def count(self, k):
        return len(self.simplices[k])

    @property
    def counts(self):
        return [self.count(k) for k in range(self.dim + 1)]

    @property
    def euler_characteristic(self):
        return sum((-1) ** k * c for k, c in enumerate(self.counts))

    @property
    def has_boundary(self):
        return bool(self.boundary_flag[self.dim - 1].any())

    # -- construction helpers ----------------------------------------------
    def _facet_coface_counts(self):
        n = self.dim
        idx = self.index(n - 1)
        counts = np.zeros(self.count(n - 1), dtype=np.int64)
        for s in self.simplices[n].tolist():
            for f in combinations(s, n):
                counts[idx[f]] += 1
        return _frozen(counts)

    def _boundary_flags(self):
        n = self.dim
        flags = [np.zeros(self.count(k), dtype=bool) for k in range(n + 1)]
        flags[n - 1] = self.coface_count == 1
        for f in self.simplices[n - 1][flags[n - 1]].tolist():
            for k in range(n - 1):
                idx = self.index(k)
                for g in combinations(f, k + 1):
                    flags[k][idx[g]] = True
        return tuple(_frozen(f) for f in flags)

    def _interior_flags(self):
        """Two one-layer interior notions.

        ``strict`` marks simplices whose closed star avoids the boundary (an
        upward-closed set).  ``core`` marks simplices none of whose vertices
        lie on the boundary (a subcomplex, closed under taking faces).
        """
        n = self.dim
        bverts = self.boundary_flag[0]
        top = self.simplices[n]
        top_touches = bverts[top].any(axis=1)
        strict, core = [], []
        for k in range(n + 1):
            idx = self.index(k)
            bad = np.zeros(self.count(k), dtype=bool)
            for s, touches in zip(top.tolist(), top_touches):
                if touches:
                    for f in combinations(s, k + 1):
                        bad[idx[f]] = True
            strict.append(_frozen(~bad))
            core.append(_frozen(~bverts[self.simplices[k]].any(axis=1)))
        return tuple(strict), tuple(core)

    def _orient(self):
        n = self.dim
        top = self.simplices[n].tolist()
        facet_owners = {}
        for t, s in enumerate(top):
            for i in range(n + 1):
                f = tuple(s[:i] + s[i + 1:])
                facet_owners.setdefault(f, []).append((t, (-1) ** i))
        if any(len(v) > 2 for v in facet_owners.values()):
            return None
        sign = np.zeros(len(top), dtype=np.int64)
        for root in range(len(top)):
            if sign[root]:
                continue
            sign[root] = self._root_sign(top[root])
            queue = deque([root])
            while queue:
                t = queue.popleft()
                s = top[t]
                for i in range(n + 1):
                    f = tuple(s[:i] + s[i + 1:])
                    for other, osign in facet_owners[f]:
                        if other == t:
                            continue
                        want = -sign[t] * (-1) ** i * osign
                        if sign[other] == 0:
                            sign[other] = want
                            queue.append(other)
                        elif sign[other] != want:
                            return None
        return _frozen(sign)

    def _root_sign(self, cell):
        # planar top-dimensional cells: counter-clockwise is positive
        pts = self.vertices[cell]
        if pts.shape[1] == self.dim:
            det = np.linalg.det(pts[1:] - pts[0])
            return 1 if det >= 0 else -1
        return 1

    # -- serialization -----------------------------------------------------
    def to_dict(self):
        return {
            "dim": self.dim,
            "vertices": self.vertices.tolist(),
            "cells": self.simplices[self.dim].tolist(),
        }

    def to_json(self):
        """Canonical serialization: sorted cells, fixed key order, no spaces."""
        return json.dumps(self.to_dict(), separators=(",", ":"))

    def __repr__(self):
        return f"SimplicialComplex(dim={self.dim}, counts={self.counts})"


def boundary_matrix(K, k):
    """Signed incidence matrix of (k-1)-faces in k-simplices (integer CSR)."""
    if not 1 <= k <= K.dim:
        raise DegreeOutOfRange(f"boundary degree {k} outside 1..{K.dim}")
    idx = K.index(k - 1)
    rows, cols, vals = [], [], []
    for j, s in enumerate(K.simplices[k].tolist()):
        for i in range(k + 1):
            rows.append(idx[tuple(s[:i] + s[i + 1:])])
            cols.append(j)
            vals.append((-1) ** i)
    return sp.csr_matrix(
        (np.array(vals, dtype=np.int64), (rows, cols)), shape=(K.count(k - 1), K.count(k))
    )


def boundary_components(K):
    """Number of connected components of the boundary subcomplex."""
    bv = np.flatnonzero(K.boundary_flag[0])
    if len(bv) == 0:
        return 0
    if K.dim == 1:
        return len(bv)
    edges = K.simplices[1][K.boundary_flag[1]]
    return _components(K.count(0), edges, bv)


def _components(nverts, edges, members):
    parent = np.arange(nverts)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges.tolist():
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return len({find(int(v)) for v in members})


def connected_components(K):
    edges = K.simplices[1]
    return _components(K.count(0), edges, np.arange(K.count(0)))


def validate(K, star_scheme="circumcentric"):
    """Check the manifold/orientation/chain invariants of ``K``.

    Returns a report dict; ``report["findings"]`` lists structured failures
    (each with a ``kind`` among ``NonManifold``, ``NonOrientable``,
    ``BoundaryNotClosed``, ``ChainError``, ``StarFailure``).  Never raises.
    """
    findings = []
    n = K.dim
    if K.duplicate_cells:
        findings.append({"kind": "NonManifold", "detail": f"{K.duplicate_cells} duplicate cells"})
    if K.isolated_vertices:
        findings.append({"kind": "NonManifold", "detail": f"{K.isolated_vertices} isolated vertices"})
    over = np.flatnonzero(K.coface_count > 2)
    if len(over):
        faces = K.simplices[n - 1][over[:5]].tolist()
        findings.append({
            "kind": "NonManifold",
            "detail": f"{len(over)} faces shared by more than two top simplices, e.g. {faces}",
        })
    if n == 2 and not len(over):
        bad = _bad_vertex_links(K)
        if bad:
            findings.append({"kind": "NonManifold", "detail": f"pinched vertices {bad[:5]}"})
    if K.orientation is None and not len(over):
        findings.append({"kind": "NonOrientable", "detail": "no consistent orientation"})

    for k in range(n):
        bf = K.boundary_flag[k + 1]
        for s in K.simplices[k + 1][bf].tolist():
            idx = K.index(k)
            if not all(K.boundary_flag[k][idx[f]] for f in combinations(s, k + 1)):
                findings.append({"kind": "BoundaryNotClosed", "detail": f"degree {k + 1}"})
                break

    for k in range(2, n + 1):
        prod = boundary_matrix(K, k - 1) @ boundary_matrix(K, k)
        if prod.count_nonzero():
            findings.append({"kind": "ChainError", "detail": f"boundary^2 != 0 at degree {k}"})

    min_dual = None
    try:
        dual = geometry.dual_volumes(K.vertices, K.simplices, star_scheme)
        min_dual = float(min(d.min() for d in dual))
        if min_dual <= 0:
            findings.append({"kind": "StarFailure", "detail": f"min dual volume {min_dual:.3e}"})
    except np.linalg.LinAlgError:
        findings.append({"kind": "StarFailure", "detail": "degenerate simplex"})

    report = {
        "dim": n,
        "counts": K.counts,
        "euler_characteristic": K.euler_characteristic,
        "boundary_components": boundary_components(K),
        "connected_components": connected_components(K),
        "orientable": K.orientation is not None,
        "min_dual_volume": min_dual,
        "ok": not findings,
        "findings": findings,
    }
    if n == 2:
        report["min_angle_deg"] = float(np.degrees(geometry.min_angle(K.vertices, K.simplices[2])))
    return report


def _bad_vertex_links(K):
    # link of a surface vertex must be a single path or cycle
    links = {}
    for s in K.simplices[2].tolist():
        for i, v in enumerate(s):
            a, b = (w for w in s if w != v)
            links.setdefault(v, []).append((a, b))
    bad = []
    for v, edges in links.items():
        verts = {u for e in edges for u in e}
        if _components_dict(verts, edges) != 1:
            bad.append(v)
    return bad


def _components_dict(verts, edges):
    parent = {v: v for v in verts}

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for a, b in edges:
        parent[find(a)] = find(b)
    return len({find(v) for v in verts})


def _raise_findings(report):
    for f in report["findings"]:
        if f["kind"] == "NonManifold":
            raise NonManifold(f["detail"])
        if f["kind"] == "NonOrientable":
            raise NonOrientable(f["detail"])
    for f in report["findings"]:
        if f["kind"] != "StarFailure":
            raise NonManifold(f["detail"])


# -- file formats -------------------------------------------------------------

def read_off(path):
    lines = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    if not lines or lines[0] != "OFF":
        raise ParseError("missing OFF header")
    try:
        nv, nf = (int(x) for x in lines[1].split()[:2])
        verts = [[float(x) for x in lines[2 + i].split()[:3]] for i in range(nv)]
        faces = []
        for i in range(nf):
            parts = [int(x) for x in lines[2 + nv + i].split()]
            if parts[0] != 3 or len(parts) < 4:
                raise ParseError("only triangular OFF faces are supported")
            faces.append(parts[1:4])
    except (IndexError, ValueError) as exc:
        raise ParseError(f"malformed OFF file: {exc}") from exc
    verts = np.array(verts)
    if np.allclose(verts[:, 2], 0.0):
        verts = verts[:, :2]
    return verts, np.array(faces)


def write_off(K, path):
    if K.dim != 2:
        raise ParseError("OFF output needs a triangle mesh")
    verts = np.zeros((K.count(0), 3))
    verts[:, : min(3, K.vertices.shape[1])] = K.vertices[:, :3]
    out = ["OFF", f"{K.count(0)} {K.count(2)} {K.count(1)}"]
    out += [" ".join(repr(float(x)) for x in v) for v in verts]
    out += ["3 " + " ".join(str(i) for i in t) for t in K.simplices[2].tolist()]
    Path(path).write_text("\n".join(out) + "\n")


def read_complex_json(path):
    try:
        data = json.loads(Path(path).read_text())
        verts = np.array(data["vertices"], dtype=float)
        cells = np.array(data["cells"], dtype=np.int64)
        dim = int(data["dim"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed complex JSON: {exc}") from exc
    if cells.ndim != 2 or cells.shape[1] != dim + 1:
        raise ParseError("cells do not match declared dimension")
    return verts, cells


def load_mesh(path, format=None):
    """Read an OFF or complex-JSON file and return a validated complex."""
    path = Path(path)
    if format is None:
        format = "OFF" if path.suffix.lower() == ".off" else "complex-JSON"
    if not path.exists():
        raise ParseError(f"no such file: {path}")
    if format.upper() == "OFF":
        verts, cells = read_off(path)
    elif format.lower() in ("complex-json", "json"):
        verts, cells = read_complex_json(path)
    else:
        raise ParseError(f"unknown mesh format {format!r}")
    K = SimplicialComplex(verts, cells)
    _raise_findings(validate(K))
    return K


def save_mesh(K, path):
    path = Path(path)
    if path.suffix.lower() == ".off":
        write_off(K, path)
    else:
        path.write_text(K.to_json() + "\n")


# -- generators ---------------------------------------------------------------

def generate(shape, **params):
    """Build one of the standard test manifolds.

    Shapes and parameters (defaults in brackets):

    - ``interval``: ``n`` [8] segments, ``length`` [1]
    - ``circle``: ``n`` [16] vertices, ``radius`` [1]
    - ``disk``: ``n`` [32] boundary segments (approx.), ``radius`` [1]
    - ``rectangle``: ``n`` [8] divisions along x, ``width`` [1], ``height`` [1]
    - ``annulus``: ``a`` [1], ``b`` [2], ``n_theta`` [32], ``n_r`` [auto]
    - ``sphere``: ``subdivisions`` [1], ``radius`` [1]
    - ``torus``: ``n_u`` [8], ``n_v`` [10] (flat torus in R^4)

    The circumcentric dual of the result is checked; :class:`StarFailure`
    is raised instead of returning a mesh with a nonpositive dual volume.
    """
    builders = {
        "interval": _interval,
        "circle": _circle,
        "disk": _disk,
        "rectangle": _rectangle,
        "annulus": _annulus,
        "sphere": _sphere,
        "torus": _torus,
    }
    if shape not in builders:
        raise BadParams(f"unknown shape {shape!r}; choose from {SHAPES}")
    params = {k: v for k, v in params.items() if v is not None}
    try:
        verts, cells = builders[shape](**params)
    except TypeError as exc:
        raise BadParams(str(exc)) from exc
    K = SimplicialComplex(verts, cells)
    report = validate(K)
    if any(f["kind"] == "StarFailure" for f in report["findings"]):
        raise StarFailure(f"{shape} {params}: {report['findings']}")
    _raise_findings(report)
    return K


def _need(cond, msg):
    if not cond:
        raise BadParams(msg)


def _interval(n=8, length=1.0):
    _need(n >= 1, "interval needs n >= 1")
    _need(length > 0, "length must be positive")
    x = np.linspace(0.0, length, n + 1)[:, None]
    return x, [[i, i + 1] for i in range(n)]


def _circle(n=16, radius=1.0):
    _need(n >= 3, "circle needs n >= 3")
    _need(radius > 0, "radius must be positive")
    t = 2 * np.pi * np.arange(n) / n
    verts = radius * np.column_stack([np.cos(t), np.sin(t)])
    return verts, [[i, (i + 1) % n] for i in range(n)]


def _delaunay(points, keep=None):
    tri = Delaunay(points)
    cells = np.sort(tri.simplices, axis=1)
    if keep is not None:
        cells = cells[keep(cells)]
    order = np.lexsort(cells.T[::-1])
    return cells[order]


def _disk(n=32, radius=1.0):
    _need(n >= 8, "disk needs n >= 8 boundary segments")
    _need(radius > 0, "radius must be positive")
    rings = max(2, int(round(n / (2 * np.pi))))
    pts = [[0.0, 0.0]]
    for k in range(1, rings + 1):
        m = n if k == rings else max(6, int(round(n * k / rings)))
        # irrational ring rotations avoid cocircular quadruples
        t = 2 * np.pi * (np.arange(m) + (k * _GOLDEN) % 1.0) / m
        r = radius * k / rings
        pts += np.column_stack([r * np.cos(t), r * np.sin(t)]).tolist()
    pts = np.array(pts)
    return pts, _delaunay(pts)


def _rectangle(n=8, width=1.0, height=1.0):
    _need(n >= 2, "rectangle needs n >= 2")
    _need(width > 0 and height > 0, "sides must be positive")
    hx = width / n
    rows = max(2, int(round(height / (hx * np.sqrt(3) / 2))))
    pts = []
    for j in range(rows + 1):
        y = height * j / rows
        if j % 2 == 0:
            xs = np.linspace(0.0, width, n + 1)
        else:
            xs = np.concatenate([[0.0], hx * (np.arange(n) + 0.5), [width]])
        pts += [[x, y] for x in xs]
    pts = np.array(pts)
    return pts, _delaunay(pts)


def annulus_rings(a, b, n_theta):
    """Default radial layer count keeping annulus triangles near-equilateral."""
    q = 1.0 + np.sqrt(3.0) * np.sin(np.pi / n_theta)
    return max(4, int(np.ceil(np.log(b / a) / np.log(q))))


def _annulus_radii(a, b, n_theta, n_r):
    radii = a * (b / a) ** (np.arange(n_r + 1) / n_r)
    if n_r < 2:
        return radii
    # boundary layers thick enough that the angle facing each boundary
    # edge is acute (positive circumcentric dual length)
    s = np.pi / n_theta
    lo = max(radii[1], a * (np.cos(s) + 1.25 * np.sin(s)))
    hi = min(radii[-2], b * (np.cos(s) - 1.25 * np.sin(s)))
    _need(lo <= hi, "annulus too thin for n_theta; increase n_theta or b/a")
    inner = lo * (hi / lo) ** (np.arange(n_r - 1) / max(n_r - 2, 1))
    return np.concatenate([[a], inner, [b]])


def _annulus(a=1.0, b=2.0, n_theta=32, n_r=None):
    _need(0 < a < b, f"annulus needs 0 < a < b (got a={a}, b={b})")
    _need(n_theta >= 8, "annulus needs n_theta >= 8")
    if n_r is None:
        n_r = annulus_rings(a, b, n_theta)
    _need(n_r >= 1, "annulus needs n_r >= 1")
    pts = []
    for k, r in enumerate(_annulus_radii(a, b, n_theta, n_r)):
        t = 2 * np.pi * (np.arange(n_theta) + 0.5 * (k % 2)) / n_theta
        pts += np.column_stack([r * np.cos(t), r * np.sin(t)]).tolist()
    pts = np.array(pts)
    # triangles with all three corners on the inner circle fill the hole
    return pts, _delaunay(pts, keep=lambda c: ~(c < n_theta).all(axis=1))


def _sphere(subdivisions=1, radius=1.0):
    _need(subdivisions >= 0, "subdivisions must be >= 0")
    _need(radius > 0, "radius must be positive")
    g = (1 + np.sqrt(5)) / 2
    verts = [
        [-1, g, 0], [1, g, 0], [-1, -g, 0], [1, -g, 0],
        [0, -1, g], [0, 1, g], [0, -1, -g], [0, 1, -g],
        [g, 0, -1], [g, 0, 1], [-g, 0, -1], [-g, 0, 1],
    ]
    faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    verts = [np.array(v, float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        mid = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in mid:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                mid[key] = len(verts) - 1
            return mid[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new
    return radius * np.array(verts), faces


def _torus(n_u=8, n_v=10):
    _need(n_u >= 4, "torus needs n_u >= 4")
    _need(n_v >= 4 and n_v % 2 == 0, "torus needs even n_v >= 4")

    # sheared lattice: row j is shifted by half a step per row
    def vid(i, j):
        if j == n_v:
            i, j = i + n_v // 2, 0
        return (i % n_u) + n_u * j

    verts = []
    for j in range(n_v):
        w = 2 * np.pi * j / n_v
        for i in range(n_u):
            u = 2 * np.pi * (i + 0.5 * j) / n_u
            verts.append([np.cos(u), np.sin(u), np.cos(w), np.sin(w)])
    cells = []
    for j in range(n_v):
        for i in range(n_u):
            cells.append([vid(i, j), vid(i + 1, j), vid(i, j + 1)])
            cells.append([vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)])
    return np.array(verts), cells
