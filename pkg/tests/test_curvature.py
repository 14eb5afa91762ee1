import numpy as np
import pytest
import sympy as sp

from reebcurv import curvature as cv
from reebcurv.contact import model_manifold
from reebcurv.exprlang import COORDS
from reebcurv.fields import FieldError
from reebcurv.realize import PerturbationField, perturb_complex_structure

X, Y, Z = COORDS


@pytest.fixture(scope="module")
def perturbed_heis():
    cd = model_manifold("heisenberg_r3", grid=(8, 8, 8))
    p = PerturbationField.make(
        0.4 * sp.sin(2 * X) + 0.2 * Y, sp.exp(sp.Rational(1, 8) * sp.cos(3 * Z) + sp.Rational(1, 10) * X)
    )
    return perturb_complex_structure(cd, p)


# ---------------------------------------------------------------------------
# Christoffel oracle


def test_flat_christoffels_vanish(torus, probes):
    gam = cv.christoffel_oracle(torus.metric(), probes)
    assert np.abs(gam).max() < 1e-12


def test_christoffel_symmetry_and_compatibility(perturbed_heis, probes):
    gam = cv.christoffel_oracle(perturbed_heis.metric(), probes)
    assert np.abs(gam - np.swapaxes(gam, 1, 2)).max() < 1e-12
    assert cv.metric_compatibility_residual(perturbed_heis.metric(), probes) < 1e-10


def test_reeb_is_geodesic_on_heisenberg(heis, probes):
    gam = cv.christoffel_oracle(heis.metric(), probes)
    Xv = np.stack([j.val for j in heis.chart.X_jets(probes, order=0)])
    nabla_XX = np.einsum("ijk...,j...,k...->i...", gam, Xv, Xv)
    assert np.abs(nabla_XX).max() < 1e-12


# ---------------------------------------------------------------------------
# sectional oracle


def test_flat_sectional_zero(torus, probes):
    u = np.tile(np.array([[1.0], [0.2], [0.0]]), (1, probes.shape[1]))
    v = np.tile(np.array([[0.0], [1.0], [0.7]]), (1, probes.shape[1]))
    assert np.abs(cv.sectional_oracle(torus.metric(), probes, u, v)).max() < 1e-12


def test_sectional_basis_invariance(perturbed_heis, probe):
    rng = np.random.default_rng(5)
    u = rng.normal(size=(3, 1))
    v = rng.normal(size=(3, 1))
    k0 = cv.sectional_oracle(perturbed_heis.metric(), probe, u, v)
    for _ in range(5):
        m = rng.normal(size=(2, 2))
        while abs(np.linalg.det(m)) < 0.2:
            m = rng.normal(size=(2, 2))
        u2 = m[0, 0] * u + m[0, 1] * v
        v2 = m[1, 0] * u + m[1, 1] * v
        k1 = cv.sectional_oracle(perturbed_heis.metric(), probe, u2, v2)
        assert np.abs(k1 - k0).max() < 1e-8


def test_heisenberg_alpha_plane_curvature(heis, probe):
    fp = heis.frame_point(probe)
    assert np.isclose(cv.sectional_oracle(heis.metric(), probe, fp.e, fp.X)[0], 1.0, atol=1e-10)


def test_degenerate_plane_rejected(heis, probe):
    u = np.array([[1.0], [0.0], [0.0]])
    with pytest.raises(FieldError):
        cv.sectional_oracle(heis.metric(), probe, u, 2 * u)


# ---------------------------------------------------------------------------
# Ricci of the Reeb field


def test_ricci_oracle_models(heis, torus, probes):
    assert np.abs(cv.ricci_reeb_oracle(torus, probes)).max() < 1e-10
    assert np.abs(cv.ricci_reeb_oracle(heis, probes) - 2.0).max() < 1e-10


def test_ricci_upper_bound_on_random_perturbations(heis, torus):
    rng = np.random.default_rng(23)
    for cd in (heis, torus):
        pts = cd.domain.with_grid((4, 4, 4)).sample_points()
        for _ in range(5):
            lam = sp.Float(rng.uniform(-0.5, 0.5)) + sp.Float(rng.uniform(-0.4, 0.4)) * sp.sin(
                2 * sp.pi * Z
            )
            eta = sp.exp(sp.Float(rng.uniform(-0.3, 0.3)) * sp.cos(2 * sp.pi * Z))
            cd_p = perturb_complex_structure(cd, PerturbationField.make(lam, eta))
            ricci = cv.ricci_reeb_oracle(cd_p, pts)
            assert ricci.max() <= cd.theta**2 / 2 + 1e-6


def test_pq_values_on_models(heis, torus, probes):
    P, Q, ricci = cv.pq_ricci(heis, point=probes)
    assert np.abs(P).max() < 1e-12 and np.abs(Q).max() < 1e-12
    assert np.abs(ricci - 2).max() < 1e-12
    P, Q, ricci = cv.pq_ricci(torus, point=probes)
    assert np.abs(P).max() < 1e-10
    assert np.abs(Q - np.pi).max() < 1e-10
    assert np.abs(ricci).max() < 1e-9


def test_ricci_closed_form_is_frame_rotation_invariant(perturbed_heis, probe):
    # recompute P, Q from frames rotated by phi inside xi; Ricci must not move
    cd = perturbed_heis
    e_jets, je_jets, _ = cd.seeded_frame_jets(probe, order=1)
    X_jets = cd.chart.X_jets(probe, order=1)
    Fj = cd.chart.F_jets(probe, order=0)
    F = np.stack([np.stack([Fj[i][j].val for j in range(3)]) for i in range(3)])
    th = cd.theta
    values = []
    for phi in (0.0, 0.3, 1.1, 2.0):
        c, s = np.cos(phi), np.sin(phi)
        u = [c * e_jets[i] + s * je_jets[i] for i in range(3)]
        ju = [c * je_jets[i] - s * e_jets[i] for i in range(3)]
        uX = cv._bracket_values(u, X_jets)
        juX = cv._bracket_values(ju, X_jets)
        uval = np.stack([j.val for j in u])
        juval = np.stack([j.val for j in ju])
        P = np.einsum("ij...,i...,j...->...", F, uX, juval) / th
        Q = (
            np.einsum("ij...,i...,j...->...", F, uX, uval)
            - np.einsum("ij...,i...,j...->...", F, juX, juval)
        ) / (2 * th)
        values.append((-2 * P**2 + th**2 / 2 - 2 * Q**2)[0])
    assert np.ptp(values) < 1e-10


def test_closed_form_matches_oracle_on_perturbed(perturbed_heis):
    pts = perturbed_heis.domain.with_grid((5, 5, 5)).sample_points()
    _, _, closed = cv.pq_ricci(perturbed_heis, point=pts)
    oracle = cv.ricci_reeb_oracle(perturbed_heis, pts)
    assert np.abs(closed - oracle).max() < 1e-10


# ---------------------------------------------------------------------------
# covariant derivative of the Reeb field


def test_covariant_derivative_heisenberg(heis, probe):
    fp = heis.frame_point(probe)
    out = cv.covariant_reeb_derivative(heis, probe, fp.e)
    assert out["residual"] < 1e-12
    assert np.allclose(out["closed_form"], fp.je, atol=1e-12)  # (theta'/2) Je with theta'=2


def test_covariant_derivative_torus_flow_constant_section(torus, probe):
    z0 = probe[2, 0]
    e_unit = np.array([[np.sin(2 * np.pi * z0)], [np.cos(2 * np.pi * z0)], [0.0]])
    out = cv.covariant_reeb_derivative(torus, probe, e_unit)
    assert np.abs(out["closed_form"]).max() < 1e-10
    assert out["residual"] < 1e-10


def test_divergence_free_identity(perturbed_heis, probes):
    cd = perturbed_heis
    fp = cd.frame_point(probes)
    g = cd.metric().evaluate(probes)
    M, _ = cv._reeb_derivative_map(cd, probes)
    div = np.einsum("ij...,i...,j...->...", g, fp.e, np.einsum("ij...,j...->i...", M, fp.e))
    div += np.einsum("ij...,i...,j...->...", g, fp.je, np.einsum("ij...,j...->i...", M, fp.je))
    assert np.abs(div).max() < 1e-10


def test_reeb_component_of_nabla_vanishes(perturbed_heis, probes):
    fp = perturbed_heis.frame_point(probes)
    out = cv.covariant_reeb_derivative(perturbed_heis, probes, fp.e)
    assert out["g_with_reeb"] < 1e-10


def test_non_xi_vector_rejected(heis, probe):
    with pytest.raises(FieldError):
        cv.covariant_reeb_derivative(heis, probe, np.array([[0.0], [0.0], [1.0]]))


# ---------------------------------------------------------------------------
# second fundamental form


def test_mean_curvature_vanishes(heis, torus, perturbed_heis, probes):
    for cd in (heis, torus, perturbed_heis):
        sf = cv.second_fundamental(cd, probes)
        assert np.abs(sf["H"]).max() < 1e-10


def test_extrinsic_curvature_examples(heis, torus, probes):
    assert np.abs(cv.second_fundamental(torus, probes)["G"]).max() < 1e-10
    assert np.abs(cv.second_fundamental(heis, probes)["G"] - 1).max() < 1e-10


def test_ricci_equals_twice_extrinsic(perturbed_heis, probes):
    sf = cv.second_fundamental(perturbed_heis, probes)
    ricci = cv.ricci_reeb_oracle(perturbed_heis, probes)
    assert np.abs(ricci - 2 * sf["G"]).max() < 1e-9


# ---------------------------------------------------------------------------
# alpha-Jacobi machinery


def test_torus_pushforward_matches_explicit_flow(torus, probe):
    path = cv.alpha_jacobi_propagate(torus, probe, v0=np.array([0.0, 0.0, 1.0]), T=1.0, steps=1000)
    z0 = probe[2, 0]
    e_unit = np.array([np.sin(2 * np.pi * z0), np.cos(2 * np.pi * z0), 0.0])
    expected = np.array([[0.0, 0.0, 1.0]]).T - 2 * np.pi * path.times[None, :] * e_unit[:, None]
    assert np.abs(path.e_tilde - expected).max() < 1e-6
    assert np.abs(path.area - 1.0).max() < 1e-9


def test_heisenberg_flow_is_isometric_on_xi(heis):
    pt = np.array([[0.3], [0.7], [0.1]])
    fp = heis.frame_point(pt)
    v0 = 0.6 * fp.e + 0.8 * fp.je
    path = cv.alpha_jacobi_propagate(heis, pt, v0=v0, T=0.8, steps=800)
    assert np.abs(path.norm_e - path.norm_e[0]).max() < 1e-10


def test_area_conservation_on_perturbed(perturbed_heis):
    pt = np.array([[0.4], [0.5], [0.05]])
    path = cv.alpha_jacobi_propagate(perturbed_heis, pt, T=0.9, steps=900)
    assert path.area_drift() < 1e-6


def test_jacobi_identity_residual(perturbed_heis):
    pt = np.array([[0.4], [0.5], [0.05]])
    path = cv.alpha_jacobi_propagate(perturbed_heis, pt, T=0.5, steps=500)
    assert path.jacobi_identity_residual() < 1e-3


def test_flowline_domain_exit_detected(heis):
    with pytest.raises(FieldError):
        cv.alpha_jacobi_propagate(heis, np.array([[0.5], [0.5], [0.8]]), T=0.5, steps=100)


def test_sectional_via_jacobi_matches_oracle(heis, torus, perturbed_heis):
    for cd, pt in [
        (heis, np.array([[0.3], [0.7], [0.5]])),
        (torus, np.array([[0.3], [0.7], [0.2]])),
        (perturbed_heis, np.array([[0.4], [0.5], [0.5]])),
    ]:
        fp = cd.frame_point(pt)
        k_jac = cv.sectional_via_jacobi(cd, pt)
        k_or = cv.sectional_oracle(cd.metric(), pt, fp.e, fp.X).item()
        assert abs(k_jac - k_or) < 1e-3


def test_jacobi_sum_equals_ricci(perturbed_heis):
    pt = np.array([[0.4], [0.5], [0.5]])
    fp = perturbed_heis.frame_point(pt)
    total = cv.sectional_via_jacobi(perturbed_heis, pt, e=fp.e) + cv.sectional_via_jacobi(
        perturbed_heis, pt, e=fp.je
    )
    ricci = cv.ricci_reeb_oracle(perturbed_heis, pt)[0]
    assert abs(total - ricci) < 1e-3


# ---------------------------------------------------------------------------
# maximal-Ricci equivalence


def test_equivalence_heisenberg_all_true(heis, probes):
    eq = cv.max_ricci_equivalence(heis, probes)
    for key in ("ricci_max", "stretch_free", "j_invariant", "g_invariant"):
        assert eq[key].all(), key
    assert eq["agree"].all()


def test_equivalence_torus_all_false_with_four_zeros(torus, probes):
    eq = cv.max_ricci_equivalence(torus, probes)
    for key in ("ricci_max", "stretch_free", "j_invariant", "g_invariant"):
        assert not eq[key].any(), key
    assert eq["agree"].all()
    assert (eq["zero_directions"] == 4).all()


def test_equivalence_agreement_on_perturbed(perturbed_heis):
    pts = perturbed_heis.domain.with_grid((5, 5, 5)).sample_points()
    eq = cv.max_ricci_equivalence(perturbed_heis, pts)
    assert eq["agree"].all()


# ---------------------------------------------------------------------------
# grid reports


def test_curvature_grid_summary(torus):
    rep = cv.curvature_grid(torus, torus.domain.with_grid((6, 6, 6)).sample_points())
    assert rep.summary["passed"]
    assert rep.summary["max_closed_vs_oracle"] < 1e-9
    assert rep.skipped == 0
    assert rep.P.shape == (216,)
