"""Curvature oracle and closed-form curvature quantities, cross-checked.

The oracle route goes metric jets -> Christoffel symbols -> Riemann tensor ->
sectional curvatures, and never touches the contact structure.  The closed
forms (P, Q, the Ricci formula, the covariant derivative of the Reeb field)
use only brackets and d(alpha).  Every closed form is checked against the
oracle at the caller's tolerance rung:

    analytic   1e-6   identities evaluated on exact jets
    integrator 1e-3   anything involving RK4 flows or finite differences

Computations are pure; per-point reports are independent and grid sweeps may
be partitioned across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contact import CompatibleMetric, ContactData, FramePoint, MetricJets
from .fields import FieldError, as_points
from .jets import Jet2

__all__ = [
    "Tolerances",
    "christoffel_oracle",
    "metric_compatibility_residual",
    "riemann_tensor",
    "sectional_oracle",
    "ricci_reeb_oracle",
    "pq_ricci",
    "covariant_reeb_derivative",
    "lie_x_complex_structure",
    "lie_x_metric",
    "second_fundamental",
    "JacobiPath",
    "alpha_jacobi_propagate",
    "sectional_via_jacobi",
    "max_ricci_equivalence",
    "curvature_grid",
    "CurvatureReport",
]


@dataclass(frozen=True)
class Tolerances:
    """Tolerance ladder; every check names its rung."""

    analytic: float = 1e-6
    integrator: float = 1e-3
    quadrature: float = 1e-6
    reeb_residual: float = 1e-10
    skip_fraction: float = 0.01


# ---------------------------------------------------------------------------
# Levi-Civita oracle


def _inv3(g: np.ndarray) -> np.ndarray:
    return np.moveaxis(np.linalg.inv(np.moveaxis(g, -1, 0)), 0, -1)


def _christoffel(mj: MetricJets) -> np.ndarray:
    ginv = _inv3(mj.g)
    dg = mj.dg
    sym = np.einsum("ilj...->lij...", dg) + np.einsum("jli...->lij...", dg) - dg
    return 0.5 * np.einsum("kl...,lij...->kij...", ginv, sym)


def _christoffel_with_derivative(mj: MetricJets) -> tuple[np.ndarray, np.ndarray]:
    ginv = _inv3(mj.g)
    dg, d2g = mj.dg, mj.d2g
    sym = np.einsum("ilj...->lij...", dg) + np.einsum("jli...->lij...", dg) - dg
    gam = 0.5 * np.einsum("kl...,lij...->kij...", ginv, sym)
    dginv = -np.einsum("ka...,mab...,bl...->mkl...", ginv, dg, ginv)
    dsym = (
        np.einsum("milj...->mlij...", d2g)
        + np.einsum("mjli...->mlij...", d2g)
        - d2g
    )
    dgam = 0.5 * (
        np.einsum("mkl...,lij...->mkij...", dginv, sym)
        + np.einsum("kl...,mlij...->mkij...", ginv, dsym)
    )
    return gam, dgam


def christoffel_oracle(metric, point) -> np.ndarray:
    """Gamma^k_ij of the Levi-Civita connection, shape (3, 3, 3, N)."""
    pts = as_points(point)
    mj = metric.jets(pts, order=1)
    if np.abs(np.linalg.det(np.moveaxis(mj.g, -1, 0))).min() < 1e-14:
        raise FieldError("metric not invertible at a requested point")
    return _christoffel(mj)


def metric_compatibility_residual(metric, point) -> float:
    """max |nabla g| -- must vanish for the Levi-Civita connection."""
    pts = as_points(point)
    mj = metric.jets(pts, order=1)
    gam = _christoffel(mj)
    nabla = (
        mj.dg
        - np.einsum("lki...,lj...->kij...", gam, mj.g)
        - np.einsum("lkj...,il...->kij...", gam, mj.g)
    )
    return float(np.abs(nabla).max())


def riemann_tensor(metric, point) -> tuple[np.ndarray, np.ndarray]:
    """(R, g) with R[l, i, j, k] such that (R(u,v)w)^l = R[l,i,j,k] u^i v^j w^k."""
    pts = as_points(point)
    mj = metric.jets(pts, order=2)
    gam, dgam = _christoffel_with_derivative(mj)
    riem = (
        np.einsum("iljk...->lijk...", dgam)
        - np.einsum("jlik...->lijk...", dgam)
        + np.einsum("lim...,mjk...->lijk...", gam, gam)
        - np.einsum("ljm...,mik...->lijk...", gam, gam)
    )
    return riem, mj.g


def _plane_denominator(g, u, v):
    uu = np.einsum("ij...,i...,j...->...", g, u, u)
    vv = np.einsum("ij...,i...,j...->...", g, v, v)
    uv = np.einsum("ij...,i...,j...->...", g, u, v)
    return uu * vv - uv**2


def sectional_oracle(metric, point, u, v) -> np.ndarray:
    """Sectional curvature of the plane spanned by u, v (basis independent)."""
    riem, g = riemann_tensor(metric, point)
    u = np.asarray(u, dtype=float).reshape(3, -1)
    v = np.asarray(v, dtype=float).reshape(3, -1)
    denom = _plane_denominator(g, u, v)
    if (np.abs(denom) < 1e-12).any():
        raise FieldError("degenerate plane passed to sectional_oracle")
    ruvv = np.einsum("lijk...,i...,j...,k...->l...", riem, u, v, v)
    num = np.einsum("lm...,l...,m...->...", g, ruvv, u)
    return num / denom


CHUNK = 16384  # cap for the (3,3,3,3,N) Riemann intermediates


def ricci_reeb_oracle(cd: ContactData, point, frame: FramePoint | None = None) -> np.ndarray:
    """Ricci(X) = k(e, X) + k(Je, X) from the curvature oracle."""
    pts = cd.domain.wrap(point)
    if frame is None and pts.shape[1] > CHUNK:
        return np.concatenate(
            [ricci_reeb_oracle(cd, pts[:, i : i + CHUNK]) for i in range(0, pts.shape[1], CHUNK)]
        )
    fp = frame if frame is not None else cd.frame_point(pts)
    metric = cd.metric()
    riem, g = riemann_tensor(metric, pts)
    out = np.zeros(pts.shape[1])
    for u in (fp.e, fp.je):
        denom = _plane_denominator(g, u, fp.X)
        ruvv = np.einsum("lijk...,i...,j...,k...->l...", riem, u, fp.X, fp.X)
        out += np.einsum("lm...,l...,m...->...", g, ruvv, u) / denom
    return out


# ---------------------------------------------------------------------------
# closed forms from brackets and d(alpha)


def _bracket_values(ujets: list[Jet2], vjets: list[Jet2]) -> np.ndarray:
    uval = np.stack([j.val for j in ujets])
    vval = np.stack([j.val for j in vjets])
    out = np.empty_like(uval)
    for i in range(3):
        out[i] = np.einsum("j...,j...->...", uval, vjets[i].grad) - np.einsum(
            "j...,j...->...", vval, ujets[i].grad
        )
    return out


def _dalpha_pair(F: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("ij...,i...,j...->...", F, u, v)


def pq_ricci(cd: ContactData, fp: FramePoint | None = None, point=None):
    """Frame invariants P, Q and the closed-form Ricci(X), brackets only.

    P = d(alpha)([e,X], Je)/theta', twice the tangential stretch rate of the
    flow; Q = d(alpha)([e,X], e)/(2 theta') - d(alpha)([Je,X], Je)/(2 theta');
    Ricci(X) = -2 P^2 + theta'^2/2 - 2 Q^2.
    """
    if fp is None:
        if point is None:
            raise FieldError("pq_ricci needs a FramePoint or a point")
        fp = cd.frame_point(point)
    pts = fp.point
    e_jets, je_jets, _ = cd.seeded_frame_jets(pts, order=1)
    X_jets = cd.chart.X_jets(pts, order=1)
    Fj = cd.chart.F_jets(pts, order=0)
    F = np.stack([np.stack([Fj[i][j].val for j in range(3)]) for i in range(3)])
    eX = _bracket_values(e_jets, X_jets)
    jeX = _bracket_values(je_jets, X_jets)
    evals = np.stack([j.val for j in e_jets])
    jevals = np.stack([j.val for j in je_jets])
    th = cd.theta
    P = _dalpha_pair(F, eX, jevals) / th
    Q = _dalpha_pair(F, eX, evals) / (2 * th) - _dalpha_pair(F, jeX, jevals) / (2 * th)
    ricci_closed = -2 * P**2 + th**2 / 2 - 2 * Q**2
    return P, Q, ricci_closed


def lie_x_complex_structure(cd: ContactData, point, v: np.ndarray | None = None) -> np.ndarray:
    """(L_X J)(v) componentwise; v defaults to the seeded frame vector e.

    Uses the constant extension of v:  (L_X J)(v) = [X, Jv] - J([X, v]).
    """
    pts = cd.domain.wrap(point)
    if v is None:
        v = cd.frame_point(pts).e
    v = np.asarray(v, dtype=float).reshape(3, -1)
    n = pts.shape[1]
    zeros = np.zeros((3, n))
    vjets = [Jet2(np.broadcast_to(v[i], (n,)).copy(), zeros.copy()) for i in range(3)]
    jv = cd.j_apply_jets(vjets, pts, order=1)
    X_jets = cd.chart.X_jets(pts, order=1)
    x_jv = _bracket_values(X_jets, jv)
    # [X, v] for constant v:  -v^j d_j X^i
    xv = _bracket_values(X_jets, vjets)
    xv_jets = [Jet2(xv[i]) for i in range(3)]
    j_xv = cd.j_apply_jets(xv_jets, pts, order=0)
    return x_jv - np.stack([j.val for j in j_xv])


def lie_x_metric(cd: ContactData, point) -> np.ndarray:
    """(L_X g)_ij = X^k d_k g_ij + g_kj d_i X^k + g_ik d_j X^k, shape (3,3,N)."""
    pts = cd.domain.wrap(point)
    mj = cd.metric().jets(pts, order=1)
    X_jets = cd.chart.X_jets(pts, order=1)
    Xval = np.stack([j.val for j in X_jets])
    dX = np.stack([j.grad for j in X_jets], axis=1)  # dX[i, k] = d_i X^k
    lie = np.einsum("k...,kij...->ij...", Xval, mj.dg)
    lie += np.einsum("ik...,kj...->ij...", dX, mj.g)
    lie += np.einsum("jk...,ik...->ij...", dX, mj.g)
    return lie


def _reeb_derivative_map(cd: ContactData, pts) -> tuple[np.ndarray, np.ndarray]:
    """M^i_j = d_j X^i + Gamma^i_{jk} X^k so that (nabla_u X)^i = M^i_j u^j."""
    gam = christoffel_oracle(cd.metric(), pts)
    X_jets = cd.chart.X_jets(pts, order=1)
    Xval = np.stack([j.val for j in X_jets])
    dX = np.stack([j.grad for j in X_jets], axis=1)  # dX[j, i] = d_j X^i
    M = np.einsum("ji...->ij...", dX) + np.einsum("ijk...,k...->ij...", gam, Xval)
    return M, Xval


def covariant_reeb_derivative(cd: ContactData, point, e: np.ndarray) -> dict:
    """nabla_e X via the closed form J(theta'/2 e - (L_X J)(e)/2), with oracle residual."""
    pts = cd.domain.wrap(point)
    e = np.asarray(e, dtype=float).reshape(3, -1)
    mj = cd.metric().jets(pts, order=0)
    alpha = np.stack([j.val for j in cd.chart.alpha_jets(pts, order=0)])
    if np.abs(np.einsum("i...,i...->...", alpha, e)).max() > 1e-8:
        raise FieldError("covariant_reeb_derivative expects e in xi = ker(alpha)")
    lxj_e = lie_x_complex_structure(cd, pts, e)
    arg = cd.theta / 2 * e - 0.5 * lxj_e
    arg_jets = [Jet2(arg[i]) for i in range(3)]
    closed = np.stack([j.val for j in cd.j_apply_jets(arg_jets, pts, order=0)])
    M, Xval = _reeb_derivative_map(cd, pts)
    oracle = np.einsum("ij...,j...->i...", M, e)
    g_closed_X = np.einsum("ij...,i...,j...->...", mj.g, closed, Xval)
    return {
        "closed_form": closed,
        "oracle": oracle,
        "residual": float(np.abs(closed - oracle).max()),
        "g_with_reeb": float(np.abs(g_closed_X).max()),
    }


def second_fundamental(cd: ContactData, point) -> dict:
    """II on the seeded frame, mean curvature H and extrinsic curvature G.

    II(u, v) = g(nabla_u v, X) = -g(v, nabla_u X) for u, v in xi, so only the
    (smooth) Reeb field is differentiated.
    """
    pts = cd.domain.wrap(point)
    fp = cd.frame_point(pts)
    M, _ = _reeb_derivative_map(cd, pts)
    g = cd.metric().jets(pts, order=0).g

    def ii(u, v):
        return -np.einsum("ij...,i...,j...->...", g, v, np.einsum("ij...,j...->i...", M, u))

    ii_ee = ii(fp.e, fp.e)
    ii_ej = ii(fp.e, fp.je)
    ii_je = ii(fp.je, fp.e)
    ii_jj = ii(fp.je, fp.je)
    H = ii_ee + ii_jj
    G = ii_ee * ii_jj - ii_ej * ii_je
    return {
        "II": np.stack([np.stack([ii_ee, ii_ej]), np.stack([ii_je, ii_jj])]),
        "H": H,
        "G": G,
    }


# ---------------------------------------------------------------------------
# alpha-Jacobi machinery


@dataclass
class JacobiPath:
    """Flowline samples of the push-forward fields started at (e, Je)."""

    times: np.ndarray
    points: np.ndarray  # (3, S)
    e_tilde: np.ndarray  # (3, S)
    e_perp: np.ndarray  # (3, S)
    e_unit: np.ndarray = field(init=False)
    norm_e: np.ndarray = field(init=False)
    norm_perp: np.ndarray = field(init=False)
    beta: np.ndarray = field(init=False)
    area: np.ndarray = field(init=False)
    cd: ContactData | None = None

    def __post_init__(self):
        g = self.cd.metric().jets(self.points, order=0).g

        def dot(u, v):
            return np.einsum("ij...,i...,j...->...", g, u, v)

        self.norm_e = np.sqrt(dot(self.e_tilde, self.e_tilde))
        self.norm_perp = np.sqrt(dot(self.e_perp, self.e_perp))
        cosb = dot(self.e_tilde, self.e_perp) / (self.norm_e * self.norm_perp)
        self.beta = np.arccos(np.clip(cosb, -1.0, 1.0))
        self.area = self.norm_e * self.norm_perp * np.sin(self.beta)
        self.e_unit = self.e_tilde / self.norm_e

    def area_drift(self) -> float:
        return float(np.abs(self.area - self.area[0]).max())

    def jacobi_identity_residual(self) -> float:
        """max |D_t^2 v + R(v, X) X| along the path, R from the oracle."""
        cd = self.cd
        pts, v = self.points, self.e_tilde
        gam = christoffel_oracle(cd.metric(), pts)
        M, Xval = _reeb_derivative_map(cd, pts)
        w = np.einsum("ij...,j...->i...", M, v)  # D_t v = nabla_v X
        dt = self.times[1] - self.times[0]
        dw = np.empty_like(w)
        dw[:, 1:-1] = (w[:, 2:] - w[:, :-2]) / (2 * dt)
        dw[:, 0] = dw[:, 1]
        dw[:, -1] = dw[:, -2]
        dtw = dw + np.einsum("ijk...,j...,k...->i...", gam, Xval, w)
        riem, g = riemann_tensor(cd.metric(), pts)
        rvxx = np.einsum("lijk...,i...,j...,k...->l...", riem, v, Xval, Xval)
        resid = dtw + rvxx
        return float(np.abs(resid[:, 1:-1]).max())


def _flow_rhs(cd: ContactData):
    def rhs(state):
        pts = state[:3]
        X_jets = cd.chart.X_jets(pts, order=1)
        Xval = np.stack([j.val for j in X_jets])
        out = np.empty_like(state)
        out[:3] = Xval
        for block in (slice(3, 6), slice(6, 9)):
            v = state[block]
            for i in range(3):
                out[block][i - 3] = np.einsum("j...,j...->...", v, X_jets[i].grad)
        return out

    return rhs


def _rk4(rhs, state0: np.ndarray, t_final: float, steps: int, record=None):
    state = state0.copy()
    h = t_final / steps
    if record is not None:
        record(0, state)
    for k in range(steps):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * h * k1)
        k3 = rhs(state + 0.5 * h * k2)
        k4 = rhs(state + h * k3)
        state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if record is not None:
            record(k + 1, state)
    return state


def alpha_jacobi_propagate(
    cd: ContactData, point, v0: np.ndarray | None = None, T: float = 1.0, steps: int = 1000
) -> JacobiPath:
    """Co-integrate the Reeb flowline and the push-forward transport by RK4.

    The transported fields satisfy dv^i/dt = v^j d_j X^i (commuting with the
    flow); the companion field starts at Je.  The flowline must stay inside
    non-periodic domain bounds.
    """
    pts = cd.domain.wrap(point)
    if pts.shape[1] != 1:
        raise FieldError("alpha_jacobi_propagate expects a single starting point")
    if v0 is None:
        v0 = cd.frame_point(pts).e
    v0 = np.asarray(v0, dtype=float).reshape(3, 1)
    alpha = np.stack([j.val for j in cd.chart.alpha_jets(pts, order=0)])
    if np.abs(np.einsum("i...,i...->...", alpha, v0)).max() > 1e-8:
        raise FieldError("initial vector must lie in xi = ker(alpha)")
    v0jets = [Jet2(v0[i]) for i in range(3)]
    jv0 = np.stack([j.val for j in cd.j_apply_jets(v0jets, pts, order=0)])

    state0 = np.concatenate([pts, v0, jv0])
    times = np.linspace(0.0, T, steps + 1)
    samples = np.empty((9, steps + 1))

    def record(k, state):
        samples[:, k] = state[:, 0]

    _rk4(_flow_rhs(cd), state0, T, steps, record=record)

    raw_pts = samples[:3]
    if not cd.domain.contains(raw_pts, tol=1e-9).all():
        raise FieldError("flowline exits a non-periodic domain before time T")
    return JacobiPath(
        times=times,
        points=cd.domain.wrap(raw_pts),
        e_tilde=samples[3:6],
        e_perp=samples[6:9],
        cd=cd,
    )


def sectional_via_jacobi(cd: ContactData, point, e: np.ndarray | None = None, dt: float = 1e-3) -> float:
    """k(e, X) via the transport formula, with a Richardson central difference.

    k = g(Je, nabla_e X)^2 - g(e, nabla_e X)^2 - d/dt g(e(t), nabla_{e(t)} X)|_0
    where e(t) is the normalized push-forward of e.  Must match the plane
    oracle at the integrator rung.
    """
    pts = cd.domain.wrap(point)
    fp = cd.frame_point(pts)
    e = fp.e if e is None else np.asarray(e, dtype=float).reshape(3, 1)
    ejets = [Jet2(e[i]) for i in range(3)]
    je = np.stack([j.val for j in cd.j_apply_jets(ejets, pts, order=0)])

    def phi_at(t: float) -> float:
        if t == 0.0:
            p, v = pts, e
        else:
            state = np.concatenate([pts, e, e])
            state = _rk4(_flow_rhs(cd), state, t, steps=4)
            p, v = cd.domain.wrap(state[:3]), state[3:6]
        M, _ = _reeb_derivative_map(cd, p)
        g = cd.metric().jets(p, order=0).g
        nv = v / np.sqrt(np.einsum("ij...,i...,j...->...", g, v, v))
        return np.einsum("ij...,i...,j...->...", g, nv, np.einsum("ij...,j...->i...", M, nv)).item()

    d_h = (phi_at(dt) - phi_at(-dt)) / (2 * dt)
    d_h2 = (phi_at(dt / 2) - phi_at(-dt / 2)) / dt
    deriv = (4 * d_h2 - d_h) / 3
    M, _ = _reeb_derivative_map(cd, pts)
    g = cd.metric().jets(pts, order=0).g
    nab_e = np.einsum("ij...,j...->i...", M, e)
    g_je = np.einsum("ij...,i...,j...->...", g, je, nab_e).item()
    g_e = np.einsum("ij...,i...,j...->...", g, e, nab_e).item()
    return g_je**2 - g_e**2 - deriv


# ---------------------------------------------------------------------------
# maximal-Ricci dichotomy


def max_ricci_equivalence(cd: ContactData, point, tol: float = 1e-4, n_angles: int = 32) -> dict:
    """Numerical test of the four equivalent maximal-Ricci conditions.

    tol is the linear rung t; the Ricci deficit threshold is the converted
    2 t^2 (the deficit equals 2 (P^2 + Q^2) while the direction sweep, L_X J
    and L_X g all scale linearly with sqrt(P^2 + Q^2)).
    Also counts zero directions of g(e, nabla_e X) on the angular sweep.
    """
    pts = cd.domain.wrap(point)
    fp = cd.frame_point(pts)
    th = cd.theta
    g = cd.metric().jets(pts, order=0).g
    M, _ = _reeb_derivative_map(cd, pts)

    ricci = ricci_reeb_oracle(cd, pts, frame=fp)
    deficit = np.abs(th**2 / 2 - ricci)
    cond1 = deficit <= 2 * tol**2 + 1e-10

    angles = (np.arange(n_angles) + 0.5) * (2 * np.pi / n_angles)
    vals = np.empty((n_angles, pts.shape[1]))
    for k, phi in enumerate(angles):
        u = np.cos(phi) * fp.e + np.sin(phi) * fp.je
        vals[k] = np.einsum("ij...,i...,j...->...", g, u, np.einsum("ij...,j...->i...", M, u))
    sweep_max = np.abs(vals).max(axis=0)
    cond2 = sweep_max <= tol
    signs = np.sign(vals)
    zero_count = (signs * np.roll(signs, -1, axis=0) < 0).sum(axis=0)

    lxj_e = lie_x_complex_structure(cd, pts, fp.e)
    lxj_je = lie_x_complex_structure(cd, pts, fp.je)

    def gnorm(v):
        return np.sqrt(np.einsum("ij...,i...,j...->...", g, v, v))

    lxj_scale = 0.5 * np.maximum(gnorm(lxj_e), gnorm(lxj_je))
    cond3 = lxj_scale <= tol

    lie_g = lie_x_metric(cd, pts)

    def frame_entry(u, v):
        return np.einsum("ij...,i...,j...->...", lie_g, u, v)

    lg_scale = 0.5 * np.max(
        np.stack(
            [
                np.abs(frame_entry(fp.e, fp.e)),
                np.abs(frame_entry(fp.e, fp.je)),
                np.abs(frame_entry(fp.je, fp.je)),
            ]
        ),
        axis=0,
    )
    cond4 = lg_scale <= tol

    agree = (cond1 == cond2) & (cond2 == cond3) & (cond3 == cond4)
    return {
        "ricci_max": cond1,
        "stretch_free": cond2,
        "j_invariant": cond3,
        "g_invariant": cond4,
        "agree": agree,
        "zero_directions": zero_count,
        "sweep_max": sweep_max,
        "deficit": deficit,
    }


# ---------------------------------------------------------------------------
# grid reports


@dataclass
class CurvatureReport:
    """Per-point curvature quantities and identity residuals over a grid."""

    points: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    ricci_closed: np.ndarray
    ricci_oracle: np.ndarray
    G: np.ndarray
    H: np.ndarray
    resid: np.ndarray
    skipped: int
    summary: dict


def curvature_grid(cd: ContactData, pts=None, tol: Tolerances = Tolerances(), rung: str = "analytic") -> CurvatureReport:
    """Evaluate the full identity suite on a grid; fails if >1% points skipped."""
    pts = cd.domain.sample_points() if pts is None else as_points(pts)
    skipped = 0
    parts = {k: [] for k in ("P", "Q", "ricci_closed", "ricci_oracle", "G", "H")}
    for i in range(0, pts.shape[1], CHUNK):
        block = pts[:, i : i + CHUNK]
        try:
            fp = cd.frame_point(block)
        except FieldError as err:
            raise FieldError(f"frame seeding failed on grid: {err}")
        P_b, Q_b, closed_b = pq_ricci(cd, fp)
        parts["P"].append(P_b)
        parts["Q"].append(Q_b)
        parts["ricci_closed"].append(closed_b)
        parts["ricci_oracle"].append(ricci_reeb_oracle(cd, block, frame=fp))
        sf_b = second_fundamental(cd, block)
        parts["G"].append(sf_b["G"])
        parts["H"].append(sf_b["H"])
    P, Q = np.concatenate(parts["P"]), np.concatenate(parts["Q"])
    ricci_closed = np.concatenate(parts["ricci_closed"])
    ricci_oracle = np.concatenate(parts["ricci_oracle"])
    sf = {"G": np.concatenate(parts["G"]), "H": np.concatenate(parts["H"])}
    rung_tol = getattr(tol, rung)
    resid = np.abs(ricci_closed - ricci_oracle)
    summary = {
        "rung": rung,
        "rung_tolerance": rung_tol,
        "n_points": int(pts.shape[1]),
        "skipped": skipped,
        "max_closed_vs_oracle": float(resid.max()),
        "max_bound_violation": float((ricci_oracle - cd.theta**2 / 2).max()),
        "max_abs_H": float(np.abs(sf["H"]).max()),
        "max_ricci_vs_2G": float(np.abs(ricci_oracle - 2 * sf["G"]).max()),
        "theta_prime": cd.theta,
    }
    summary["passed"] = bool(
        summary["max_closed_vs_oracle"] <= rung_tol
        and summary["max_bound_violation"] <= tol.analytic
        and summary["max_abs_H"] <= 1e-8
        and summary["max_ricci_vs_2G"] <= tol.analytic
    )
    return CurvatureReport(
        points=pts,
        P=P,
        Q=Q,
        ricci_closed=ricci_closed,
        ricci_oracle=ricci_oracle,
        G=sf["G"],
        H=sf["H"],
        resid=resid,
        skipped=skipped,
        summary=summary,
    )
