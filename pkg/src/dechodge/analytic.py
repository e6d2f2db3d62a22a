"""Closed-form reference forms on the plane annulus and refinement studies.

On ``a <= r <= b`` the 2-form ``omega = -1/2 log(x^2 + y^2) dx^dy`` is
harmonic and its codifferential is the angular field
``phi = (-y dx + x dy) / (x^2 + y^2)``, closed and co-closed but not exact.
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import harmonic, mesh, operators
from .errors import BadParams, EvalError
from .operators import Cochain


@dataclass(frozen=True)
class AnalyticForm:
    """A smooth form given by an evaluator plus a radial domain guard.

    ``evaluate(points)`` takes ``(m, k)`` coordinates; for degree 1 it returns
    covector components ``(m, k)``, for degree 2 the ``dx^dy`` coefficient.
    The guard accepts radii in ``[r_min, r_max]`` of the first two coordinates.
    """

    degree: int
    func: object
    r_min: float = 0.0
    r_max: float = np.inf
    name: str = ""

    def __call__(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.hypot(points[:, 0], points[:, 1])
        if np.any(r <= 0.0) or np.any(r < self.r_min) or np.any(r > self.r_max):
            raise EvalError(f"{self.name}: evaluation outside r in [{self.r_min}, {self.r_max}]")
        return self.func(points)


def _guard(a, b, slack):
    # chords of the inner circle dip slightly below r = a
    return a * (1.0 - slack), b * (1.0 + slack)


def _omega(points):
    x, y = points[:, 0], points[:, 1]
    return -0.5 * np.log(x * x + y * y)


def _angular(points):
    x, y = points[:, 0], points[:, 1]
    r2 = x * x + y * y
    out = np.zeros_like(points)
    out[:, 0] = -y / r2
    out[:, 1] = x / r2
    return out


def annulus_omega(a=1.0, b=2.0, slack=0.1):
    lo, hi = _guard(a, b, slack)
    return AnalyticForm(2, _omega, lo, hi, "omega")


def annulus_phi(a=1.0, b=2.0, slack=0.1):
    lo, hi = _guard(a, b, slack)
    return AnalyticForm(1, _angular, lo, hi, "phi")


def torus_angle_form():
    """``du`` on the flat torus ``(cos u, sin u, cos v, sin v)`` in R^4."""
    return AnalyticForm(1, _angular, 0.5, 2.0, "du")


def omega_gradient(points):
    """Exact gradient of the coefficient ``f = -1/2 log r^2``."""
    x, y = points[:, 0], points[:, 1]
    r2 = x * x + y * y
    return np.stack([-x / r2, -y / r2], axis=1)


def codifferential_of_2form(grad):
    """Planar ``delta(f dx^dy) = -*d*(f dx^dy) = f_y dx - f_x dy`` from grad f."""
    return np.stack([grad[:, 1], -grad[:, 0]], axis=1)


def identity_residuals(points):
    """Max deviations of ``delta omega - phi``, ``d phi``, ``delta phi``, ``Laplacian omega``.

    All derivatives are closed-form, so each entry is rounding-level.
    """
    x, y = points[:, 0], points[:, 1]
    r2 = x * x + y * y
    r4 = r2 * r2
    # phi = (P, Q) with P = -y/r^2, Q = x/r^2
    dQdx = (r2 - 2 * x * x) / r4
    dPdy = -(r2 - 2 * y * y) / r4
    dPdx = 2 * x * y / r4
    dQdy = -2 * x * y / r4
    # f = -1/2 log r^2: f_xx + f_yy
    fxx = -(r2 - 2 * x * x) / r4
    fyy = -(r2 - 2 * y * y) / r4
    delta_omega = codifferential_of_2form(omega_gradient(points))
    return {
        "delta_omega_minus_phi": float(np.max(np.abs(delta_omega - _angular(points)))),
        "d_phi": float(np.max(np.abs(dQdx - dPdy))),
        "delta_phi": float(np.max(np.abs(dPdx + dQdy))),
        "laplacian_omega": float(np.max(np.abs(fxx + fyy))),
    }


def sample_annulus(n, a=1.0, b=2.0, seed=0):
    rng = np.random.default_rng(seed)
    r = np.sqrt(rng.uniform(a * a, b * b, n))
    t = rng.uniform(0, 2 * np.pi, n)
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=1)


# -- refinement study -------------------------------------------------------------

RATIO_MIN = 1.5
WINDING_TOL = 1e-3
CAUCHY_TOL = 0.1


@dataclass
class ConvergenceTable:
    shape: str
    rows: list
    ratios: list
    checks: dict = field(default_factory=dict)

    @property
    def decreasing(self):
        errs = [r["e_delta"] for r in self.rows]
        return all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))

    @property
    def passed(self):
        return all(self.checks.values())

    def to_dict(self):
        return {"shape": self.shape, "rows": self.rows, "ratios": self.ratios,
                "checks": self.checks, "pass": self.passed}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self):
        buf = io.StringIO()
        cols = list(self.rows[0].keys())
        writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for r in self.rows:
            writer.writerow({k: ("" if r[k] is None else repr(r[k]) if isinstance(r[k], float) else r[k])
                             for k in cols})
        return buf.getvalue()


def _max_edge(K):
    e = K.simplices[1]
    return float(np.max(np.linalg.norm(K.vertices[e[:, 0]] - K.vertices[e[:, 1]], axis=1)))


def inner_winding(K, phi_h, a):
    """Sum of ``phi_h`` over inner-boundary edges, oriented counterclockwise."""
    e = K.simplices[1]
    X = K.vertices
    r = np.hypot(X[:, 0], X[:, 1])
    on_inner = K.boundary_flag[1] & np.isclose(r[e[:, 0]], a) & np.isclose(r[e[:, 1]], a)
    p, q = X[e[on_inner, 0]], X[e[on_inner, 1]]
    sign = np.sign(p[:, 0] * q[:, 1] - p[:, 1] * q[:, 0])
    return float(np.sum(sign * phi_h[on_inner]))


def study_layers(n_theta, a=1.0, b=2.0):
    """Radial layer count nearest to equilateral triangles (at least 2)."""
    q = 1.0 + np.sqrt(3.0) * np.sin(np.pi / n_theta)
    return max(2, int(round(np.log(b / a) / np.log(q))))


def _annulus_row(n_theta, a, b, star, exact_aspect=False, classes=True):
    n_r = study_layers(n_theta, a, b)
    if exact_aspect:
        # move the outer radius so every layer is exactly equilateral
        b = a * (1.0 + np.sqrt(3.0) * np.sin(np.pi / n_theta)) ** n_r
    K = mesh.generate("annulus", a=a, b=b, n_theta=n_theta, n_r=n_r)
    ops = operators.assemble(K, star)
    omega_h = operators.de_rham_map(K, annulus_omega(a, b), 2, tri_rule=7).values
    phi_h = operators.de_rham_map(K, annulus_phi(a, b), 1).values
    free = ~K.boundary_flag[1]
    diff = np.where(free, ops.delta(2) @ omega_h - phi_h, 0.0)
    ref = np.where(free, phi_h, 0.0)
    h = _max_edge(K)
    lap = np.where(ops.core[2], ops.laplacian(2) @ omega_h, 0.0)
    coord = None
    if classes:
        coords = harmonic.echo_backward(ops, Cochain(2, omega_h), check=False)
        coord = float(np.linalg.norm(coords))
    return {
        "n_theta": n_theta,
        "n_r": n_r,
        "b": float(b),
        "n_edges": K.count(1),
        "h": h,
        "e_delta": ops.norm(1, diff) / ops.norm(1, ref),
        "e_laplacian": ops.norm(2, lap) * h * h / ops.norm(2, omega_h),
        "winding": inner_winding(K, phi_h, a),
        "class_coordinate": coord,
    }


def _torus_row(n, star):
    K = mesh.generate("torus", n_u=n, n_v=n if n % 2 == 0 else n + 1)
    ops = operators.assemble(K, star)
    # coarse chords subtend large angles; 12 nodes keep d(alpha) at rounding level
    alpha = operators.de_rham_map(K, torus_angle_form(), 1, edge_points=12).values
    return {
        "n_theta": n,
        "n_r": None,
        "b": None,
        "n_edges": K.count(1),
        "h": _max_edge(K),
        "e_delta": ops.norm(0, ops.delta(1) @ alpha) / ops.norm(1, alpha),
        "e_d": float(np.max(np.abs(ops.d[1] @ alpha))),
        "winding": None,
        "class_coordinate": None,
    }


def convergence_study(resolutions=(16, 32, 64), shape="annulus", a=1.0, b=2.0,
                      star="circumcentric", exact_aspect=False, classes=True):
    """Refine and tabulate discrete-vs-analytic errors.

    ``annulus``: e_delta compares ``delta_h omega_h`` with ``phi_h`` on edges
    off the boundary; e_laplacian is the core-row Laplacian residual of
    ``omega_h`` scaled by h^2; the class coordinate is the norm of the
    cohomology coordinates of ``delta_h omega_h`` (skipped when ``classes``
    is false).  Radial layers follow :func:`study_layers`; ``exact_aspect``
    instead moves ``b`` so the layers are exactly equilateral.  ``torus``: the harmonic
    angle form ``du``, for which e_delta measures star consistency only.
    """
    resolutions = [int(n) for n in resolutions]
    if len(resolutions) < 3:
        raise BadParams("a convergence study needs at least 3 resolutions")
    if any(n2 <= n1 for n1, n2 in zip(resolutions, resolutions[1:])):
        raise BadParams("resolutions must be strictly increasing")
    if shape == "annulus":
        rows = [_annulus_row(n, a, b, star, exact_aspect, classes) for n in resolutions]
    elif shape == "torus":
        rows = [_torus_row(n, star) for n in resolutions]
    else:
        raise BadParams(f"no analytic reference for shape {shape!r}")
    errs = [r["e_delta"] for r in rows]
    ratios = [e1 / e2 if e2 > 0 else None for e1, e2 in zip(errs, errs[1:])]
    table = ConvergenceTable(shape, rows, ratios)
    if shape == "annulus":
        table.checks = {
            "decreasing": table.decreasing,
            "ratio": all(q is not None and q >= RATIO_MIN for q in ratios),
            "winding": abs(rows[-1]["winding"] - 2 * np.pi) <= WINDING_TOL,
        }
        if classes:
            cc = [r["class_coordinate"] for r in rows]
            table.checks["class_nonzero"] = all(c > 1e-8 for c in cc)
            table.checks["class_cauchy"] = all(
                abs(c2 - c1) <= CAUCHY_TOL * abs(c2) for c1, c2 in zip(cc, cc[1:])
            )
    else:
        table.checks = {"consistent": max(errs) <= 1e-8}
    return table
