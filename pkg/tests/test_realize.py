import numpy as np
import pytest
import sympy as sp

from reebcurv import curvature as cv
from reebcurv import metricspace as ms
from reebcurv import realize as rz
from reebcurv.contact import model_manifold
from reebcurv.exprlang import COORDS
from reebcurv.fields import CallableScalarField

X, Y, Z = COORDS


def _random_perturbations(cd, rng, count):
    out = []
    for _ in range(count):
        lam = sp.Float(rng.uniform(-0.3, 0.3))
        eta_arg = sp.Float(0)
        syms = (X, Y, Z)
        for axis in range(3):
            c = sp.Float(rng.uniform(-0.35, 0.35))
            if cd.domain.periodic[axis]:
                w = 2 * sp.pi / cd.domain.length(axis)
                lam += c * sp.sin(w * syms[axis])
                eta_arg += sp.Float(0.25 * rng.uniform(-1, 1)) * sp.cos(w * syms[axis])
            else:
                lam += c * syms[axis]
                eta_arg += sp.Float(0.25 * rng.uniform(-1, 1)) * syms[axis]
        out.append(rz.PerturbationField.make(lam, sp.exp(eta_arg)))
    return out


# ---------------------------------------------------------------------------
# complex-structure perturbation


def test_identity_perturbation_leaves_metric(heis, probes):
    p = rz.PerturbationField.make("0", "1")
    cd = rz.perturb_complex_structure(heis, p)
    assert np.abs(cd.metric().evaluate(probes) - heis.metric().evaluate(probes)).max() == 0.0


def test_constant_eta_scales_section_length(heis, probe):
    p = rz.PerturbationField.make("0", "2")
    cd = rz.perturb_complex_structure(heis, p)
    e0 = np.array([[np.sqrt(2)], [0.0], [np.sqrt(2) * probe[1, 0]]])
    val = np.einsum("ij...,i...,j...->...", cd.metric().evaluate(probe), e0, e0)
    assert np.isclose(val[0], 4.0)  # |e|_{g*} = eta = 2


def test_random_perturbations_stay_spd(heis):
    rng = np.random.default_rng(7)
    pts = heis.domain.with_grid((5, 5, 5)).sample_points()
    for p in _random_perturbations(heis, rng, 5):
        cd = rz.perturb_complex_structure(heis, p)
        eigs = np.linalg.eigvalsh(np.moveaxis(cd.metric().evaluate(pts), -1, 0))
        assert eigs.min() > 0


def test_nonpositive_eta_rejected(heis):
    with pytest.raises(rz.RealizationError):
        rz.perturb_complex_structure(heis, rz.PerturbationField.make("0", "y - 2"))


# ---------------------------------------------------------------------------
# perturbed Ricci closed form


def test_identity_case_reduces_to_frame_formula(heis, torus, probes):
    p = rz.PerturbationField.make("0", "1")
    for cd in (heis, torus):
        closed = rz.ricci_perturbed_closed_form(cd, p, probes)
        _, _, base = cv.pq_ricci(cd, point=probes)
        assert np.abs(closed - base).max() < 1e-10


def test_constant_lambda_torus_family_is_ricci_flat(torus, probes):
    for lam in (0.3, 1.0, -2.0):
        p = rz.PerturbationField.make(str(lam), "1")
        closed = rz.ricci_perturbed_closed_form(torus, p, probes)
        assert np.abs(closed).max() < 1e-10
        cd = rz.perturb_complex_structure(torus, p)
        assert np.abs(cv.ricci_reeb_oracle(cd, probes)).max() < 1e-9


@pytest.mark.parametrize("model", ["heisenberg_r3", "torus_xi_n"])
def test_closed_form_matches_oracle_on_random_fields(model):
    cd = model_manifold(model, grid=(6, 6, 6)) if model == "heisenberg_r3" else model_manifold(
        model, n=1, grid=(6, 6, 6)
    )
    rng = np.random.default_rng(42)
    pts = cd.domain.with_grid((4, 4, 4)).sample_points()
    for p in _random_perturbations(cd, rng, 10):
        closed = rz.ricci_perturbed_closed_form(cd, p, pts)
        oracle = cv.ricci_reeb_oracle(rz.perturb_complex_structure(cd, p), pts)
        assert np.abs(closed - oracle).max() < 1e-9


def test_closed_form_with_fd_backend_fields(heis):
    # finite-difference (lambda, eta) land on the integrator rung
    lam_expr = 0.2 * X + 0.1 * Y
    eta_expr = sp.exp(0.15 * Z)
    lam_fd = CallableScalarField(sp.lambdify(COORDS, lam_expr, "numpy"), h=1e-4)
    eta_fd = CallableScalarField(sp.lambdify(COORDS, eta_expr, "numpy"), h=1e-4)
    p_fd = rz.PerturbationField(lam_fd, eta_fd)
    p_exact = rz.PerturbationField.make(lam_expr, eta_expr)
    pts = np.array([[0.3, 0.6], [0.4, 0.2], [0.5, 0.7]])
    closed_fd = rz.ricci_perturbed_closed_form(heis, p_fd, pts)
    cd_star = rz.perturb_complex_structure(heis, p_exact)
    oracle = cv.ricci_reeb_oracle(cd_star, pts)
    assert np.abs(closed_fd - oracle).max() < 1e-3


# ---------------------------------------------------------------------------
# constant-lambda sweep


def test_sweep_trivial_on_torus(torus):
    res = rz.sweep_lower_ricci(torus, c=torus.theta**2 / 2, pts=torus.domain.with_grid((4, 4, 4)).sample_points())
    assert res["lambda"] == 0.0
    assert res["max_ricci_oracle"] < torus.theta**2 / 2


def test_sweep_precondition_fails_on_k_contact(heis):
    with pytest.raises(rz.SweepError, match="maximum everywhere"):
        rz.sweep_lower_ricci(heis, c=0.0, pts=heis.domain.with_grid((4, 4, 4)).sample_points())


def test_sweep_blocked_by_lambda_independent_points(torus):
    with pytest.raises(rz.SweepError, match="lambda-independent"):
        rz.sweep_lower_ricci(torus, c=-1.0, pts=torus.domain.with_grid((4, 4, 4)).sample_points())


def test_sweep_reaches_negative_target_on_randomized_mapping_torus(mapping):
    p = rz.PerturbationField.make(0.4 * sp.sin(2 * sp.pi * Z) + 0.3 * Y, sp.exp(sp.Float(0.2) * sp.cos(2 * sp.pi * Z)))
    cd = rz.perturb_complex_structure(mapping, p, label="mapping+random")
    pts = cd.domain.with_grid((5, 5, 5)).sample_points()
    res = rz.sweep_lower_ricci(cd, c=0.0, pts=pts)
    assert res["max_ricci_closed"] < 0.0
    assert res["max_ricci_oracle"] < 0.0


# ---------------------------------------------------------------------------
# flow solver jets


def test_flow_jets_match_finite_differences(heis):
    flow = rz.FlowJetField(heis, sp.Integer(0), base=0.1, extent=0.5, step=1e-3)

    def eta_val(x, y, z):
        pts = np.stack([np.asarray(x, dtype=float).ravel(), np.asarray(y, dtype=float).ravel(), np.asarray(z, dtype=float).ravel()])
        return flow.jets_at(pts, order=0)[1].val.reshape(np.shape(x))  # mu field

    fd = CallableScalarField(eta_val, h=1e-4, tol=1e-4)
    pts = np.array([[0.3], [0.6], [0.4]])
    jet_fd = fd.jet(pts, order=2)
    _, mu_jet = flow.jets_at(pts, order=2)
    assert np.abs(jet_fd.val - mu_jet.val).max() < 1e-10
    assert np.abs(jet_fd.grad - mu_jet.grad).max() < 1e-6
    assert np.abs(jet_fd.hess - mu_jet.hess).max() < 1e-4


def test_flow_jets_variational_vs_fd_with_seed_dependence(heis):
    # f depends on x and y, so the seed-derivative blocks are exercised
    f_expr = sp.Rational(1, 2) * sp.sin(2 * sp.pi * X) * sp.cos(sp.pi * Y) + sp.Rational(1, 4)
    flow = rz.FlowJetField(heis, f_expr, base=0.1, extent=0.5, step=1e-3)

    def mu_val(x, y, z):
        pts = np.stack([np.asarray(x, dtype=float).ravel(), np.asarray(y, dtype=float).ravel(), np.asarray(z, dtype=float).ravel()])
        return flow.jets_at(pts, order=0)[1].val.reshape(np.shape(x))

    fd = CallableScalarField(mu_val, h=1e-4, tol=1e-4)
    pts = np.array([[0.31], [0.57], [0.45]])
    jet_fd = fd.jet(pts, order=2)
    _, mu_jet = flow.jets_at(pts, order=2)
    assert np.abs(jet_fd.grad - mu_jet.grad).max() < 1e-6
    assert np.abs(jet_fd.hess - mu_jet.hess).max() < 1e-4


# ---------------------------------------------------------------------------
# local realization


def test_local_realize_identity_case(heis):
    box = rz.FlowBox(base=0.1, extent=0.5, seeds=(5, 5), slices=6)
    sol = rz.local_realize(heis, "2", box)
    assert sol.sup_residual < 1e-12
    assert np.abs(sol.eta - 1).max() == 0.0
    assert np.abs(sol.mu).max() == 0.0
    assert sol.boundary_residual == 0.0


def test_local_realize_flat_target(heis):
    box = rz.FlowBox(base=0.1, extent=0.5, seeds=(5, 5), slices=6)
    sol = rz.local_realize(heis, "0", box)
    assert sol.sup_residual < 1e-3
    assert sol.boundary_residual < 1e-14
    # mu grows linearly: mu(t) = 2t when f = 0 and eta stays 1
    assert np.abs(sol.mu[-1] - 2 * 0.5).max() < 1e-12


def test_local_realize_sine_target_and_exact_solution(heis):
    box = rz.FlowBox(base=0.08, extent=0.34, seeds=(4, 4), slices=6)
    sol = rz.local_realize(heis, "2 - 2*sin(2*pi*z)^2", box)
    assert sol.sup_residual < 1e-3
    # exact solution: mu(t) = (cos(2 pi z0) - cos(2 pi (z0+t)))/pi
    z0 = box.base
    exact = (np.cos(2 * np.pi * z0) - np.cos(2 * np.pi * (z0 + sol.times))) / np.pi
    err = np.abs(sol.mu - exact[:, None]).max()
    assert err < 1e-10

    sol_half = rz.local_realize(heis, "2 - 2*sin(2*pi*z)^2", box, step=5e-4)
    err_half = np.abs(sol_half.mu - exact[:, None]).max()
    assert err_half <= max(err / 4, 1e-14)  # 4th-order refinement above roundoff


def test_local_realize_admissibility_error_names_point(heis):
    box = rz.FlowBox(base=0.1, extent=0.3, seeds=(4, 4))
    with pytest.raises(rz.AdmissibilityError, match="exceeds"):
        rz.local_realize(heis, "3", box)


def test_local_realize_box_must_fit(heis):
    with pytest.raises(rz.RealizationError, match="flow box"):
        rz.local_realize(heis, "0", rz.FlowBox(base=0.8, extent=0.5))


def test_local_realize_needs_translation_reeb(torus):
    with pytest.raises(rz.RealizationError, match="translation"):
        rz.local_realize(torus, "0", rz.FlowBox(base=0.1, extent=0.2))


def test_realized_metric_respects_upper_bound(heis):
    box = rz.FlowBox(base=0.1, extent=0.5, seeds=(4, 4), slices=5)
    sol = rz.local_realize(heis, "2 - 2*sin(2*pi*(z+0.25))^2 - 1/2", box)
    assert sol.achieved_ricci.max() <= heis.theta**2 / 2 + 1e-6


# ---------------------------------------------------------------------------
# almost-global pipeline


@pytest.fixture(scope="module")
def pipeline():
    cd = model_manifold("mapping_torus_box", grid=(8, 8, 8))
    return cd, rz.almost_global_realize(
        cd, "0", epsilon=0.1, n_max=3, verify_grid=(6, 6, 10), band_grid=(6, 6, 8)
    )


def test_pipeline_residuals_and_volume(pipeline):
    cd, seq = pipeline
    assert max(seq.residuals_outside) < 1e-3
    assert max(abs(v - 0.5) for v in seq.volumes) < 1e-9
    for vol, eps in zip(seq.band_volumes, seq.epsilons):
        assert vol < eps / 2
    assert all(d2 < d1 for d1, d2 in zip(seq.deltas, seq.deltas[1:]))


def test_pipeline_distance_bounds_geometric(pipeline):
    _, seq = pipeline
    ratios = [b2 / b1 for b1, b2 in zip(seq.pair_bounds, seq.pair_bounds[1:])]
    assert np.allclose(ratios, 1 / np.sqrt(2), atol=1e-6)
    assert all(p <= b * 2 for p, b in zip(seq.pair_path_lengths, seq.pair_bounds))


def test_pipeline_limit_is_singular_on_seed_page(pipeline):
    _, seq = pipeline
    pts = np.array([[0.5, 0.5], [0.5, 0.5], [0.0, 0.5]])
    mask = seq.limit.degenerate_mask(pts)
    assert mask[0] and not mask[1]


def test_pipeline_convergence_report(pipeline):
    _, seq = pipeline
    rep = ms.convergence_report(seq)
    assert rep.verdict
    assert rep.summable and rep.tail_r_squared > 0.99
    assert rep.nullset_ok and rep.pointwise_ok


def test_identity_pipeline_all_distances_zero(mapping):
    seq = rz.almost_global_realize(
        mapping, "2", epsilon=0.1, n_max=2, verify_grid=(5, 5, 8), band_grid=(5, 5, 6)
    )
    assert max(seq.residuals_outside) < 1e-12
    assert max(seq.pair_bounds) == 0.0
    rep = ms.convergence_report(seq)
    assert rep.verdict


def test_pipeline_requires_periodic_fiber(heis):
    with pytest.raises(rz.RealizationError, match="periodic"):
        rz.almost_global_realize(heis, "0", epsilon=0.1, n_max=1)


def test_pipeline_rejects_inadmissible_f(mapping):
    with pytest.raises(rz.AdmissibilityError):
        rz.almost_global_realize(mapping, "2 + x", epsilon=0.1, n_max=1)


def test_interpolated_structures_square_to_minus_id(pipeline):
    _, seq = pipeline
    pts = seq.domain.with_grid((4, 4, 8)).sample_points()
    for cd_n in seq.contacts[:2]:
        a, b, c = cd_n.abc_jets(pts, order=0)
        resid = np.abs(-(a.val**2) - c.val * b.val - 1.0).max()
        assert resid < 1e-12
        assert b.val.min() > 0
