"""End-to-end acceptance checks, one PASS/FAIL line per criterion.

Run with ``pytest -s tests/test_acceptance.py`` or ``python tests/test_acceptance.py``.
"""

import sys
import time
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

sys.path.insert(0, str(Path(__file__).parent))

from conftest import get_mesh, get_ops  # noqa: E402
from dechodge import analytic, harmonic, linalg  # noqa: E402
from dechodge import decomposition as dc  # noqa: E402
from dechodge.operators import Cochain  # noqa: E402

BETTI_MESHES = [
    ("disk", {"n": 8}), ("disk", {"n": 16}),
    ("annulus", {"n_theta": 14, "n_r": 3}), ("annulus", {"n_theta": 16}),
    ("circle", {"n": 8}), ("circle", {"n": 17}),
    ("sphere", {"subdivisions": 1}), ("sphere", {"subdivisions": 2}),
    ("torus", {"n_u": 6, "n_v": 6}), ("torus", {"n_u": 9, "n_v": 10}),
]
BOUNDED_MESHES = [
    ("interval", {"n": 7}),
    ("disk", {"n": 8}),
    ("annulus", {"n_theta": 14, "n_r": 3}),
    ("annulus", {"n_theta": 16}),
    ("rectangle", {}),
]
SPLIT_MESHES = BOUNDED_MESHES + [("torus", {"n_u": 6, "n_v": 6}), ("circle", {"n": 8})]

SUBSPACE_TOL = 1e-10
SOLVE_TOL = 1e-8
PINV_TOL = 1e-6
GRAM_TOL = 1e-6
DENOM_TOL = 1e-8
GRAM_MIN_SV = 0.9
WINDING_TOL = 1e-3
RATIO_MIN = 1.5
RUNTIME_LIMIT = 60.0


def _tag(shape, params):
    return shape + "(" + ",".join(f"{k}={v}" for k, v in params.items()) + ")"


def criterion_1():
    t0 = time.perf_counter()
    bad = []
    for shape, params in BETTI_MESHES:
        K = get_mesh(shape, **params)
        ops = get_ops(shape, **params)
        if harmonic.laplacian_kernel_dims(ops) != dc.betti_numbers(K):
            bad.append(_tag(shape, params) + " absolute")
        if harmonic.laplacian_kernel_dims(ops, dirichlet=True) != dc.relative_betti_numbers(K):
            bad.append(_tag(shape, params) + " relative")
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < RUNTIME_LIMIT
    return ok, f"{len(BETTI_MESHES)} meshes, {elapsed:.1f}s, mismatches={bad}"


def criterion_2():
    worst_res = worst_ip = 0.0
    bad = []
    for shape, params in SPLIT_MESHES:
        ops = get_ops(shape, **params)
        for p in range(ops.dim + 1):
            dims = dc.dimensions(ops, p)
            if dims["rank_delta_next"] + dims["dim_CcC"] + dims["rank_d_dirichlet"] != dims["N"]:
                bad.append(f"{_tag(shape, params)} p={p}")
            rng = np.random.default_rng(100 + p)
            for _ in range(20):
                w = rng.standard_normal(ops.size(p))
                r = dc.hodge_split(ops, Cochain(p, w))
                worst_res = max(worst_res, r.residual / r.norm)
                worst_ip = max(worst_ip, max(abs(v) for v in r.inner_products.values()) / r.norm**2)
    ok = not bad and worst_res <= SUBSPACE_TOL and worst_ip <= SUBSPACE_TOL
    return ok, f"residual {worst_res:.1e}, orthogonality {worst_ip:.1e}, rank identity failures={bad}"


def _m_proj(ops, p, basis, v):
    return basis @ (basis.T @ (ops.star[p] * v))


def criterion_3():
    bad = []
    worst = 0.0
    for shape, params in BOUNDED_MESHES:
        ops = get_ops(shape, **params)
        for p in range(ops.dim + 1):
            d = dc.dimensions(ops, p)
            if not d["dim_CcC"] == d["dim_CcC_N"] + d["dim_EcC"] == d["dim_CcC_D"] + d["dim_CcE"]:
                bad.append(f"{_tag(shape, params)} p={p}")
            E = dc.basis_EcC(ops, p).columns
            N = dc.basis_CcC_N(ops, p).columns
            for v in E.T:
                closed = np.abs(ops.coboundary(p) @ v).max(initial=0.0)
                worst = max(worst, closed, ops.norm(p, _m_proj(ops, p, N, v)))
    ok = not bad and worst <= SUBSPACE_TOL
    return ok, f"dimension failures={bad}, EcC exactness residual {worst:.1e}"


def criterion_4():
    bad = []
    worst = 0.0
    for shape, params in BOUNDED_MESHES:
        ops = get_ops(shape, **params)
        for p in range(ops.dim + 1):
            holds, diag = dc.lemma2_check(ops, p, tol=1e-6)
            worst = max(worst, diag["max_cosine"])
            if not holds:
                bad.append(f"{_tag(shape, params)} p={p}")
    return not bad, f"nonzero intersections={bad}, max principal cosine {worst:.3f}"


def criterion_5():
    ops = get_ops("annulus", n_theta=32)
    worst = 0.0
    for p in range(ops.dim + 1):
        rng = np.random.default_rng(500 + p)
        for _ in range(10):
            alpha = Cochain(p, rng.standard_normal(ops.size(p)))
            beta = harmonic.lemma1_solve(ops, alpha)
            worst = max(worst, harmonic.interior_residual(ops, beta, alpha))
    coarse = get_ops("annulus", n_theta=16)
    oracle_err = 0.0
    for p in range(coarse.dim + 1):
        rng = np.random.default_rng(550 + p)
        rows = coarse.core[p]
        A = sp.csr_matrix(coarse.laplacian(p))[rows].toarray()
        for _ in range(3):
            alpha = rng.standard_normal(coarse.size(p))
            beta = harmonic.lemma1_solve(coarse, Cochain(p, alpha)).values
            ref = np.linalg.pinv(A) @ alpha[rows]
            oracle_err = max(oracle_err, np.abs(beta - ref).max() / np.abs(ref).max())
    ok = worst <= SOLVE_TOL and oracle_err <= PINV_TOL
    return ok, f"interior residual {worst:.1e}, pinv oracle deviation {oracle_err:.1e}"


def criterion_6():
    cases = [("annulus", {"n_theta": 16}, (1, 2)), ("annulus", {"n_theta": 32}, (1, 2)),
             ("disk", {"n": 16}, (1,))]
    gram_dev = denom = 0.0
    min_sv = np.inf
    for shape, params, degrees in cases:
        ops = get_ops(shape, **params)
        for p in degrees:
            G, _ = harmonic.echo_gram(ops, p)
            gram_dev = max(gram_dev, np.abs(G - np.eye(len(G))).max())
            min_sv = min(min_sv, np.linalg.svd(G, compute_uv=False).min())
            H = harmonic.harm_space(ops, p - 1).harm
            rng = np.random.default_rng(600 + p)
            for _ in range(10):
                beta = H @ rng.standard_normal(H.shape[1])
                c = harmonic.echo_backward(ops, Cochain(p, ops.d[p - 1] @ beta))
                denom = max(denom, np.abs(c).max() / ops.norm(p - 1, beta))
    ok = gram_dev <= GRAM_TOL and denom <= DENOM_TOL and min_sv >= GRAM_MIN_SV
    return ok, f"Gram deviation {gram_dev:.1e}, min singular value {min_sv:.4f}, denominators {denom:.1e}"


def _verify_rows(fn, shape, params):
    rows = fn(get_ops(shape, **params))
    return ([r["expected"] for r in rows], all(r["constructive_pass"] for r in rows),
            [r["direct_dim"] for r in rows])


def criterion_7():
    expected = {"annulus": [1, 2, 1], "disk": [1, 1, 0]}
    notes = []
    ok = True
    for shape, key in (("annulus", "n_theta"), ("disk", "n")):
        for n in (16, 32):
            exp, constructive, direct = _verify_rows(harmonic.verify_theorem1, shape, {key: n})
            ok &= exp == expected[shape] and constructive
            if n == 32:
                ok &= direct == expected[shape]
            notes.append(f"{shape}{n}: {exp} constructive={constructive} direct={direct}")
    return ok, "; ".join(notes)


def criterion_8():
    expected = {"annulus": [1, 2, 1], "disk": [0, 1, 1]}
    notes = []
    ok = True
    for shape, params in (("annulus", {"n_theta": 32}), ("disk", {"n": 16}), ("disk", {"n": 32})):
        exp, constructive, direct = _verify_rows(harmonic.verify_remark1, shape, params)
        ok &= exp == expected[shape] and constructive and direct == expected[shape]
        notes.append(f"{_tag(shape, params)}: {exp} constructive={constructive} direct={direct}")
    return ok, "; ".join(notes)


def criterion_8_coarse_info():
    _, constructive, direct = _verify_rows(harmonic.verify_remark1, "annulus", {"n_theta": 16})
    return f"annulus(n_theta=16) mirrored: constructive={constructive} direct={direct} (below resolution threshold)"


def criterion_9():
    table = analytic.convergence_study((16, 32, 64))
    errs = [r["e_delta"] for r in table.rows]
    ratios = table.ratios
    winding = table.rows[-1]["winding"]
    classes = [r["class_coordinate"] for r in table.rows]
    ok = (table.decreasing and all(q >= RATIO_MIN for q in ratios)
          and abs(winding - 2 * np.pi) <= WINDING_TOL and all(c > 1e-8 for c in classes))
    detail = (f"e_delta {[f'{e:.4f}' for e in errs]}, ratios {[f'{q:.2f}' for q in ratios]}, "
              f"winding err {abs(winding - 2 * np.pi):.1e}, class coords {[f'{c:.3f}' for c in classes]}")
    return ok, detail


def criterion_9_control_info():
    table = analytic.convergence_study((32, 64, 128), exact_aspect=True, classes=False)
    errs = [f"{r['e_delta']:.4f}" for r in table.rows]
    return f"exact-aspect meshes n_theta 32/64/128: e_delta {errs}, ratios {[f'{q:.2f}' for q in table.ratios]}"


def criterion_10():
    ops = get_ops("torus")
    dims = harmonic.harmonic_cohomology_dims(ops)
    checks = harmonic.classical_hodge_check(ops)
    dnorm = max(c["d_on_kernel_norm"] for c in checks)
    ok = dims == [1, 2, 1] and dnorm <= 1e-10 and all(c["pass"] for c in checks)
    return ok, f"harmonic cohomology dims {dims}, max |d on ker Laplacian| {dnorm:.1e}"


CRITERIA = {
    1: ("Betti oracle agreement", criterion_1),
    2: ("three-way orthogonal decomposition", criterion_2),
    3: ("harmonic-field splittings", criterion_3),
    4: ("Neumann/Dirichlet fields intersect trivially", criterion_4),
    5: ("interior Laplacian solver", criterion_5),
    6: ("echo round trip", criterion_6),
    7: ("harmonic cohomology of (Harm, d)", criterion_7),
    8: ("harmonic cohomology of (Harm, delta)", criterion_8),
    9: ("annulus reference convergence", criterion_9),
    10: ("closed-manifold degeneration", criterion_10),
}
INFO = {8: criterion_8_coarse_info, 9: criterion_9_control_info}


def _line(num, name, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} criterion {num}: {name} | {detail}"


@pytest.mark.parametrize("num", sorted(CRITERIA))
def test_criterion(num, capsys):
    name, fn = CRITERIA[num]
    ok, detail = fn()
    with capsys.disabled():
        print("\n" + _line(num, name, ok, detail))
        if num in INFO:
            print(f"INFO criterion {num}: {INFO[num]()}")
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for num in sorted(CRITERIA):
        name, fn = CRITERIA[num]
        ok, detail = fn()
        failed += not ok
        print(_line(num, name, ok, detail))
        if num in INFO:
            print(f"INFO criterion {num}: {INFO[num]()}")
    sys.exit(1 if failed else 0)
