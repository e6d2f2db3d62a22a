import json

import numpy as np
import pytest
import scipy.sparse as sp

from dechodge import decomposition as dc
from dechodge import harmonic as hm
from dechodge import operators
from dechodge.errors import BoundaryRequired, NotExact, NotHarmonic, ResolutionTooCoarse
from dechodge.mesh import SimplicialComplex
from dechodge.operators import Cochain

from conftest import get_mesh, get_ops


def _generator(ops, p, label="CcC_N"):
    return Cochain(p, dc.basis(ops, p, label).columns[:, 0])


# -- surjectivity solver ------------------------------------------------------------

def test_interior_solve_zero(annulus32):
    beta = hm.lemma1_solve(annulus32, Cochain(1, np.zeros(annulus32.size(1))))
    assert not beta.values.any()


@pytest.mark.parametrize("p", [0, 1, 2])
def test_interior_solve_consistent_rhs(annulus32, p):
    rng = np.random.default_rng(p)
    alpha = Cochain(p, annulus32.laplacian(p) @ rng.standard_normal(annulus32.size(p)))
    beta = hm.lemma1_solve(annulus32, alpha)
    assert hm.interior_residual(annulus32, beta, alpha) <= 1e-12 * np.linalg.norm(alpha.values)


def test_interior_solve_disk_constants_match_pinv(disk16):
    ops = disk16
    alpha = Cochain(0, np.ones(ops.size(0)))
    beta = hm.lemma1_solve(ops, alpha)
    assert hm.interior_residual(ops, beta, alpha) <= 1e-8 * np.linalg.norm(alpha.values)
    rows = ops.core[0]
    A = sp.csr_matrix(ops.laplacian(0))[rows].toarray()
    oracle = np.linalg.pinv(A) @ alpha.values[rows]
    assert np.abs(beta.values - oracle).max() <= 1e-6 * np.abs(oracle).max()


def test_interior_solve_preconditions(torus):
    with pytest.raises(BoundaryRequired):
        hm.lemma1_solve(torus, Cochain(0, np.ones(torus.size(0))))
    tri = operators.assemble(SimplicialComplex([[0, 0], [1, 0], [0.4, 0.9]], [[0, 1, 2]]))
    with pytest.raises(ResolutionTooCoarse):
        hm.lemma1_solve(tri, Cochain(0, np.ones(3)))


# -- echo maps -------------------------------------------------------------------------

@pytest.mark.parametrize("shape,params,s", [
    ("annulus", {"n_theta": 32}, 1),
    ("annulus", {"n_theta": 16, "n_r": 4}, 1),
    ("annulus", {"n_theta": 32}, 0),
    ("disk", {"n": 16}, 0),
])
def test_echo_round_trip(shape, params, s):
    ops = get_ops(shape, **params)
    alpha = _generator(ops, s)
    cert = hm.echo_forward(ops, alpha)
    assert cert.degree == s + 1
    assert cert.residuals["round_trip"] <= 1e-8
    assert cert.residuals["interior_harmonicity"] <= 1e-8
    assert np.abs(ops.d[s] @ cert.beta - cert.phi).max() == 0
    coords = hm.echo_backward(ops, Cochain(s + 1, cert.phi))
    assert np.allclose(coords, cert.alpha_coordinates, atol=1e-8)
    json.dumps(cert.to_dict())


def test_echo_rejects_closed(torus):
    with pytest.raises(BoundaryRequired):
        hm.echo_forward(torus, _generator(torus, 1))


def test_echo_forward_needs_harmonic_source(annulus32):
    rng = np.random.default_rng(0)
    with pytest.raises(NotHarmonic):
        hm.echo_forward(annulus32, Cochain(1, rng.standard_normal(annulus32.size(1))))


def test_echo_backward_preconditions(annulus32):
    ops = annulus32
    with pytest.raises(NotExact):
        hm.echo_backward(ops, _generator(ops, 1))
    rng = np.random.default_rng(1)
    phi = ops.d[0] @ rng.standard_normal(ops.size(0))
    with pytest.raises(NotHarmonic):
        hm.echo_backward(ops, Cochain(1, phi))


def test_denominators_map_to_zero(annulus32):
    ops = annulus32
    H = hm.harm_space(ops, 1).harm
    rng = np.random.default_rng(3)
    for _ in range(10):
        beta = H @ rng.standard_normal(H.shape[1])
        coords = hm.echo_backward(ops, Cochain(2, ops.d[1] @ beta))
        assert np.abs(coords).max() <= 1e-8 * ops.norm(1, beta)


def test_analytic_omega_has_nonzero_class(annulus32):
    from dechodge import analytic

    omega = operators.de_rham_map(annulus32.K, analytic.annulus_omega(), 2, tri_rule=7)
    coords = hm.echo_backward(annulus32, omega, check=False)
    assert abs(coords[0]) > 1.0


def test_mirror_echo_shifts_down(annulus32):
    ops = annulus32
    alpha = _generator(ops, 2, "CcC_D")
    cert = hm.echo_forward(ops, alpha, mirror=True)
    assert cert.degree == 1
    assert cert.residuals["round_trip"] <= 1e-8
    # the echo vanishes on the boundary
    assert np.abs(cert.phi[ops.K.boundary_flag[1]]).max() == 0


# -- Harm spaces ---------------------------------------------------------------------

def test_harm_space_torus(torus):
    for p in range(3):
        hs = hm.harm_space(torus, p)
        assert hs.dims["Harm"] == dc.betti_numbers(torus.K)[p]
        if p < 2:
            assert np.abs(torus.d[p] @ hs.harm).max() <= 1e-10
    assert hm.harmonic_cohomology_dims(torus) == [1, 2, 1]


def test_harm_space_containments(annulus32):
    ops = annulus32
    N = dc.basis_CcC_N(ops, 1).columns
    C = hm.harm_space(ops, 1).closed
    P = C @ (C.T @ (ops.star[1][:, None] * N))
    assert np.abs(P - N).max() <= 1e-8
    H0 = hm.harm_space(ops, 0).harm
    H1 = hm.harm_space(ops, 1).harm
    image = ops.d[0] @ H0
    resid = image - H1 @ (H1.T @ (ops.star[1][:, None] * image))
    assert np.abs(resid).max() <= 1e-8 * np.abs(image).max()
    assert hm.harm_space(ops, 2).dims["EHarm"] >= 1


# -- verification reports -------------------------------------------------------------

@pytest.mark.parametrize("shape,params,expected", [
    ("annulus", {"n_theta": 16, "n_r": 4}, [1, 2, 1]),
    ("annulus", {"n_theta": 32}, [1, 2, 1]),
    ("disk", {"n": 16}, [1, 1, 0]),
    ("disk", {"n": 32}, [1, 1, 0]),
])
def test_d_pipeline_dims(shape, params, expected):
    rows = hm.verify_theorem1(get_ops(shape, **params))
    assert [r["expected"] for r in rows] == expected
    assert all(r["constructive_pass"] for r in rows)
    assert [r["direct_dim"] for r in rows] == expected


@pytest.mark.parametrize("shape,params,expected", [
    ("annulus", {"n_theta": 32}, [1, 2, 1]),
    ("disk", {"n": 16}, [0, 1, 1]),
    ("disk", {"n": 32}, [0, 1, 1]),
])
def test_delta_pipeline_dims(shape, params, expected):
    rows = hm.verify_remark1(get_ops(shape, **params))
    assert [r["expected"] for r in rows] == expected
    assert all(r["constructive_pass"] for r in rows)
    assert [r["direct_dim"] for r in rows] == expected


def test_delta_pipeline_coarse_is_reported(annulus16):
    rows = hm.verify_remark1(annulus16)
    assert not rows[0]["resolved"]
    assert rows[0]["direct_dim"] is None
    assert "ResolutionTooCoarse" in rows[0]["error"]


def test_verify_accepts_complex():
    rows = hm.verify_theorem1(get_mesh("disk", n=16))
    assert len(rows) == 3


def test_closed_mesh_classical(torus):
    with pytest.raises(BoundaryRequired):
        hm.verify_theorem1(torus)
    report = hm.verify(torus)
    assert report["mode"] == "classical" and report["pass"]
    assert [d["dim_ker_laplacian"] for d in report["degrees"]] == [1, 2, 1]
    assert max(d["d_on_kernel_norm"] for d in report["degrees"]) <= 1e-10


def test_report_schema(annulus32):
    report = hm.verify(annulus32)
    keys = {"betti", "betti_rel", "dim_CcC_N", "dim_CcC_D", "echo_gram_min_singular_value",
            "theorem1_expected", "theorem1_constructive_pass", "theorem1_direct_dim",
            "remark1_expected", "remark1_pass", "residuals"}
    for d in report["degrees"]:
        assert keys <= set(d)
    assert report["pass"]
    json.dumps(report)


def test_laplacian_kernel_dims():
    ops = get_ops("annulus", n_theta=16, n_r=4)
    assert hm.laplacian_kernel_dims(ops) == [1, 1, 0]
    assert hm.laplacian_kernel_dims(ops, dirichlet=True) == [0, 1, 1]
