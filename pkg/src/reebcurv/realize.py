"""Reeb Ricci prescription: complex-structure perturbation, the local flow-box
solver, constant-coefficient Ricci lowering, and the almost-global pipeline.

The perturbation sends the unit section e of xi to J_*(e) = eta^2 Je + lambda e
(eta > 0); with mu = lambda / eta^2 the prescription Ricci_*(X) = f reduces to
two coupled ODEs along Reeb flowlines,

    d/dt log eta = -(A + mu B) / theta'
    d/dt mu      = 2 [ sqrt(theta'^2/4 - f/2) / eta^2 - B / (2 theta' eta^4)
                       + C / (2 theta') + mu A / theta' + mu^2 B / (2 theta') ]

with eta = 1, mu = 0 on the seed surface, where A, B, C are the d(alpha)
brackets of the unit frame against the Reeb field.  The solver co-integrates
the first and second seed-derivatives of (eta, mu) (variational equations),
so the resulting metric has exact-to-integrator jets and the curvature oracle
applies to solver output directly.

Flowline solves are independent across seeds; everything returned is
immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import sympy as sp

from . import metricspace
from .contact import ABField, CompatibleMetric, CompatibilityError, ContactData
from .curvature import Tolerances, _bracket_values, ricci_reeb_oracle
from .exprlang import COORDS, parse_expression
from .fields import (
    ChartDomain,
    ExprScalarField,
    FieldError,
    ScalarField,
    as_points,
    lie_bracket_exprs,
)
from .jets import Jet2
from .metricspace import SemiMetricField

__all__ = [
    "RealizationError",
    "AdmissibilityError",
    "SweepError",
    "PerturbationField",
    "FlowBox",
    "RealizationSolution",
    "MetricSequence",
    "perturb_complex_structure",
    "ricci_perturbed_closed_form",
    "bracket_coefficients",
    "sweep_lower_ricci",
    "FlowJetField",
    "local_realize",
    "almost_global_realize",
]

CLAMP_FLOOR_FACTOR = 1e-6  # clamp floor = factor * theta'^2
ETA_SYM, MU_SYM = sp.symbols("eta mu", real=True)


class RealizationError(FieldError):
    pass


class AdmissibilityError(RealizationError):
    """Prescribed f exceeds the curvature bound theta'^2/2 (minus the clamp floor)."""


class SweepError(RealizationError):
    pass


# ---------------------------------------------------------------------------
# perturbation of the complex structure


def _as_scalar_field(obj) -> ScalarField:
    if isinstance(obj, ScalarField):
        return obj
    return ExprScalarField(obj)


@dataclass(frozen=True)
class PerturbationField:
    """The (lambda, eta) data of a complex-structure perturbation; eta > 0."""

    lam: ScalarField
    eta: ScalarField

    @classmethod
    def make(cls, lam, eta) -> "PerturbationField":
        return cls(_as_scalar_field(lam), _as_scalar_field(eta))

    def mu_jet(self, pts, order: int = 1) -> Jet2:
        return self.lam.jet(pts, order) / (self.eta.jet(pts, order) ** 2)


def perturb_complex_structure(cd: ContactData, p: PerturbationField, label: str | None = None) -> ContactData:
    """ContactData with J_*(e) = eta^2 Je + lambda e on cd's unit section.

    The unique extension with J_*^2 = -id fixes J_* on Je; in base-frame
    coefficients this is the composition a' = lambda, b' = eta^2.  The length
    of the (old) unit section under the new metric becomes eta.
    """
    eta_vals = p.eta(cd.domain.sample_points())
    if (eta_vals <= 0).any():
        raise RealizationError("eta must be positive everywhere")
    if isinstance(p.eta, ExprScalarField) and isinstance(p.lam, ExprScalarField):
        new = cd.compose_frame_endomorphism(p.lam.expr, p.eta.expr**2, label=label)
    else:
        from .fields import FuncJetField

        def b_fn(pts, order):
            return p.eta.jet(pts, order) ** 2

        new = cd.compose_frame_endomorphism(p.lam, FuncJetField(b_fn), label=label)
    report = new.validate()
    if not report["passed"]:
        raise CompatibilityError(f"perturbed structure fails validation: {report}")
    return new


def bracket_coefficients(cd: ContactData, point) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """A = d(alpha)([e,X], Je), B = d(alpha)([e,X], e), C = d(alpha)([Je,X], Je)
    for the canonical unit frame of cd, evaluated numerically from jets."""
    pts = as_points(point)
    e, je = cd.unit_frame_jets(pts, order=1)
    X = cd.chart.X_jets(pts, order=1)
    Fj = cd.chart.F_jets(pts, order=0)
    F = np.stack([np.stack([Fj[i][j].val for j in range(3)]) for i in range(3)])
    eX = _bracket_values(e, X)
    jeX = _bracket_values(je, X)
    ev = np.stack([j.val for j in e])
    jev = np.stack([j.val for j in je])

    def pair(u, v):
        return np.einsum("ij...,i...,j...->...", F, u, v)

    return pair(eX, jev), pair(eX, ev), pair(jeX, jev)


def ricci_perturbed_closed_form(cd: ContactData, p: PerturbationField, point) -> np.ndarray:
    """Closed-form Ricci_*(X) of the perturbed metric; brackets and d(alpha) only.

    With P_* = (A + (lambda/eta^2) B)/theta' and
    Q_* = B/(2 theta' eta^2) - eta^2 C/(2 theta') - lambda A/theta'
          - lambda^2 B/(2 theta' eta^2):

    Ricci_* = -2 (P_* + X eta/eta)^2 + theta'^2/2
              - 2 (Q_* - lambda/(2 eta) X eta + eta/2 X(lambda/eta))^2
    """
    pts = cd.domain.wrap(point)
    A, B, C = bracket_coefficients(cd, pts)
    th = cd.theta
    Xval = np.stack([j.val for j in cd.chart.X_jets(pts, order=0)])
    lam_j = p.lam.jet(pts, order=1)
    eta_j = p.eta.jet(pts, order=1)
    lam, eta = lam_j.val, eta_j.val
    X_eta = eta_j.directional(Xval)
    X_lam_over_eta = (lam_j / eta_j).directional(Xval)
    P = (A + (lam / eta**2) * B) / th
    Q = (
        B / (2 * th * eta**2)
        - eta**2 * C / (2 * th)
        - lam * A / th
        - lam**2 * B / (2 * th * eta**2)
    )
    first = P + X_eta / eta
    second = Q - lam / (2 * eta) * X_eta + eta / 2 * X_lam_over_eta
    return -2 * first**2 + th**2 / 2 - 2 * second**2


# ---------------------------------------------------------------------------
# constant-coefficient Ricci lowering


def _ricci_lambda(A, B, C, th, lam):
    P = (A + lam * B) / th
    Q = B / (2 * th) - C / (2 * th) - lam * A / th - lam**2 * B / (2 * th)
    return -2 * P**2 + th**2 / 2 - 2 * Q**2


def sweep_lower_ricci(
    cd: ContactData,
    c: float,
    pts=None,
    lambda_limit: float = 2.0**20,
    tol: Tolerances = Tolerances(),
    oracle_check: bool = True,
) -> dict:
    """Find a constant lambda with max-over-grid Ricci_lambda < c.

    Requires Ricci < theta'^2/2 somewhere (otherwise the lowering polynomial
    is constant and the perturbation cannot help).  At points where the
    polynomial is lambda-independent the scan succeeds only if c exceeds the
    fixed value there; such blockers are reported honestly.
    """
    th = cd.theta
    if c > th**2 / 2:
        raise SweepError(f"target c={c} exceeds the bound theta'^2/2 = {th ** 2 / 2}")
    pts = cd.domain.sample_points() if pts is None else as_points(pts)
    A, B, C = bracket_coefficients(cd, pts)
    ricci0 = _ricci_lambda(A, B, C, th, 0.0)
    if (ricci0 >= th**2 / 2 - 1e-10).all():
        raise SweepError(
            "precondition fails: Ricci(X) attains its maximum everywhere, "
            "the lowering polynomial is constant in lambda"
        )
    const_mask = (np.abs(A) < 1e-12) & (np.abs(B) < 1e-12)
    if const_mask.any():
        const_vals = ricci0[const_mask]
        if const_vals.max() >= c:
            where = pts[:, const_mask][:, np.argmax(const_vals)]
            raise SweepError(
                "no lambda can reach the target: Ricci_lambda is lambda-independent "
                f"with value {const_vals.max():.6g} >= c at {tuple(float(v) for v in where)}"
            )

    scanned = []
    found = None
    magnitudes = [0.0]
    m = 0.25
    while m <= lambda_limit:
        magnitudes.extend([m, -m])
        m *= 2
    for lam in magnitudes:
        worst = float(_ricci_lambda(A, B, C, th, lam).max())
        scanned.append({"lambda": lam, "max_ricci": worst})
        if worst < c:
            found = lam
            break
    if found is None:
        blockers = pts[:, np.argsort(-_ricci_lambda(A, B, C, th, magnitudes[-1]))[:3]]
        raise SweepError(
            f"no constant lambda within |lambda| <= {lambda_limit} reaches c={c}; "
            f"worst grid points {blockers.T.tolist()}"
        )
    result = {
        "lambda": found,
        "max_ricci_closed": scanned[-1]["max_ricci"],
        "target": c,
        "scanned": scanned,
    }
    if oracle_check:
        cd_lam = cd.compose_frame_endomorphism(sp.Float(found), sp.Integer(1), label=f"{cd.label}+sweep")
        check_pts = pts if pts.shape[1] <= 4096 else pts[:, :: max(1, pts.shape[1] // 4096)]
        oracle = ricci_reeb_oracle(cd_lam, check_pts)
        result["max_ricci_oracle"] = float(oracle.max())
        if result["max_ricci_oracle"] >= c + tol.analytic:
            raise SweepError(
                f"oracle verification failed: max Ricci {result['max_ricci_oracle']} >= c={c}"
            )
    return result


# ---------------------------------------------------------------------------
# flow-box solver with variational jets


def _lambdify5(expr: sp.Expr):
    fn = sp.lambdify((*COORDS, ETA_SYM, MU_SYM), expr, modules="numpy")

    def call(x, y, z, e, m):
        out = np.asarray(fn(x, y, z, e, m), dtype=float)
        if out.shape != np.shape(x):
            out = np.broadcast_to(out, np.shape(x))
        return out

    return call


def _bracket_coefficient_exprs(cd: ContactData) -> tuple[sp.Expr, sp.Expr, sp.Expr]:
    e, je = cd.unit_frame_exprs()
    X = cd.chart.reeb_exprs
    F = cd.chart.F_exprs
    eX = lie_bracket_exprs(e, X)
    jeX = lie_bracket_exprs(je, X)

    def pair(u, v):
        return sp.simplify(sum(F[i, j] * u[i] * v[j] for i in range(3) for j in range(3)))

    return pair(eX, je), pair(eX, e), pair(jeX, je)


def _positions_for(axis: int, base: float, t: float, seeds: np.ndarray) -> np.ndarray:
    trans = [i for i in range(3) if i != axis]
    pos = np.empty((3, seeds.shape[1]))
    pos[trans[0]] = seeds[0]
    pos[trans[1]] = seeds[1]
    pos[axis] = base + t
    return pos


def _translation_axis(cd: ContactData) -> int:
    """Index of the coordinate axis along which the Reeb field translates."""
    X = cd.chart.reeb_exprs
    comps = [sp.simplify(X[i]) for i in range(3)]
    for k in range(3):
        if comps[k] == 1 and all(comps[i] == 0 for i in range(3) if i != k):
            return k
    raise RealizationError(
        "realization requires a chart whose Reeb field is a unit coordinate "
        f"translation; got X = {comps}"
    )


class FlowJetField:
    """(eta, mu) on a flow box, with order-2 jets from variational equations.

    Evaluation batches are grouped by unique transverse seed and integrated in
    lockstep through the sorted flow times by fixed-step RK4 (substeps never
    exceed ``step``); results are cached per point batch.
    """

    def __init__(
        self,
        cd: ContactData,
        f_expr: sp.Expr,
        base: float,
        extent: float,
        step: float = 1e-3,
        clamp_floor: float | None = None,
    ):
        if not cd.is_analytic:
            raise RealizationError("the flow solver needs analytic (a, b) background fields")
        self.cd = cd
        self.f_expr = sp.sympify(f_expr)
        self.base = float(base)
        self.extent = float(extent)
        self.step = float(step)
        th = cd.theta
        self.clamp_floor = CLAMP_FLOOR_FACTOR * th**2 if clamp_floor is None else clamp_floor
        self.axis = _translation_axis(cd)
        self.trans = tuple(i for i in range(3) if i != self.axis)
        self.periodic_axis = cd.domain.periodic[self.axis]

        A, B, C = _bracket_coefficient_exprs(cd)
        arg = sp.simplify(th**2 / 4 - self.f_expr / 2)
        self.identity_case = arg == 0
        S = sp.Integer(0) if self.identity_case else sp.sqrt(arg)
        eta, mu = ETA_SYM, MU_SYM
        G = -(A + mu * B) / th
        H = 2 * (
            S / eta**2
            - B / (2 * th * eta**4)
            + C / (2 * th)
            + mu * A / th
            + mu**2 * B / (2 * th)
        )
        syms = (*COORDS, eta, mu)
        self._G = self._partial_table(G, syms, with_eta=False)
        self._H = self._partial_table(H, syms, with_eta=True)
        self._cache: dict = {}

    @staticmethod
    def _partial_table(expr, syms, with_eta: bool):
        idx_first = [0, 1, 2, 4] if not with_eta else [0, 1, 2, 3, 4]
        table = {(): _lambdify5(expr)}
        firsts = {}
        for i in idx_first:
            d = sp.diff(expr, syms[i])
            firsts[i] = d
            table[(i,)] = _lambdify5(d)
        for i in idx_first:
            for j in idx_first:
                if j < i:
                    continue
                table[(i, j)] = _lambdify5(sp.diff(firsts[i], syms[j]))
        return table

    def _tab(self, table, args, *key):
        key = tuple(sorted(key))
        return table[key](*args)

    def _rhs(self, t: float, state: np.ndarray, seeds: np.ndarray) -> np.ndarray:
        pos = self._positions(t, seeds)
        E, M = state[0], state[1]
        args = (pos[0], pos[1], pos[2], E, M)
        u, v = self.trans
        G = self._G
        H = self._H
        g0 = self._tab(G, args)
        h0 = self._tab(H, args)
        ds = np.empty_like(state)
        ds[0] = E * g0
        ds[1] = h0
        # first variations with respect to the transverse seed coordinates
        slots = {u: (2, 3), v: (4, 5)}
        for s_ax, (ie, im) in slots.items():
            Es, Ms = state[ie], state[im]
            g_s = self._tab(G, args, s_ax)
            ds[ie] = Es * g0 + E * (g_s + self._tab(G, args, 4) * Ms)
            ds[im] = self._tab(H, args, s_ax) + self._tab(H, args, 3) * Es + self._tab(H, args, 4) * Ms
        # second variations
        pair_slots = [((u, u), 6, 7, (2, 3), (2, 3)), ((u, v), 8, 9, (2, 3), (4, 5)), ((v, v), 10, 11, (4, 5), (4, 5))]
        g_m, g_mm = self._tab(G, args, 4), self._tab(G, args, 4, 4)
        h_e, h_m = self._tab(H, args, 3), self._tab(H, args, 4)
        h_ee, h_em, h_mm = self._tab(H, args, 3, 3), self._tab(H, args, 3, 4), self._tab(H, args, 4, 4)
        for (s_ax, t_ax), iE, iM, (isE, isM), (itE, itM) in pair_slots:
            Es, Ms, Et, Mt = state[isE], state[isM], state[itE], state[itM]
            Est, Mst = state[iE], state[iM]
            g_s, g_t = self._tab(G, args, s_ax), self._tab(G, args, t_ax)
            g_sm, g_tm = self._tab(G, args, s_ax, 4), self._tab(G, args, t_ax, 4)
            g_st = self._tab(G, args, s_ax, t_ax)
            ds[iE] = (
                Est * g0
                + Es * (g_t + g_m * Mt)
                + Et * (g_s + g_m * Ms)
                + E * (g_st + g_sm * Mt + g_tm * Ms + g_mm * Ms * Mt + g_m * Mst)
            )
            h_s_e, h_s_m = self._tab(H, args, s_ax, 3), self._tab(H, args, s_ax, 4)
            h_t_e, h_t_m = self._tab(H, args, t_ax, 3), self._tab(H, args, t_ax, 4)
            ds[iM] = (
                self._tab(H, args, s_ax, t_ax)
                + h_s_e * Et
                + h_s_m * Mt
                + h_t_e * Es
                + h_t_m * Ms
                + h_ee * Es * Et
                + h_em * (Es * Mt + Et * Ms)
                + h_mm * Ms * Mt
                + h_e * Est
                + h_m * Mst
            )
        return ds

    def _positions(self, t: float, seeds: np.ndarray) -> np.ndarray:
        return _positions_for(self.axis, self.base, t, seeds)

    def integrate_checkpoints(self, seeds: np.ndarray, checkpoints: np.ndarray) -> list[np.ndarray]:
        """Lockstep RK4 through the sorted checkpoint times; returns state copies."""
        state = np.zeros((12, seeds.shape[1]))
        state[0] = 1.0  # eta
        out = []
        t = 0.0
        for tau in checkpoints:
            gap = tau - t
            if gap < -1e-12:
                raise RealizationError("checkpoints must be sorted ascending")
            if gap > 1e-15:
                nsub = max(1, math.ceil(gap / self.step - 1e-9))
                h = gap / nsub
                for _ in range(nsub):
                    k1 = self._rhs(t, state, seeds)
                    k2 = self._rhs(t + h / 2, state + h / 2 * k1, seeds)
                    k3 = self._rhs(t + h / 2, state + h / 2 * k2, seeds)
                    k4 = self._rhs(t + h, state + h * k3, seeds)
                    state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                    t += h
                t = tau
            if not np.isfinite(state[:2]).all() or state[0].min() <= 1e-8 or state[0].max() >= 1e8:
                bad = int(np.argmin(state[0]))
                raise RealizationError(
                    f"eta overflow/underflow on the flowline seeded at "
                    f"{(float(seeds[0, bad]), float(seeds[1, bad]))} by time {t:.4f}"
                )
            out.append(state.copy())
        return out

    def _relative_times(self, pts: np.ndarray) -> np.ndarray:
        w = pts[self.axis]
        rel = w - self.base
        if self.periodic_axis:
            period = self.cd.domain.length(self.axis)
            rel = np.mod(rel, period)
        if (rel < -1e-12).any() or (rel > self.extent + 1e-9).any():
            raise RealizationError("point outside the flow box of the solver")
        return np.clip(rel, 0.0, self.extent)

    def jets_at(self, pts, order: int = 2) -> tuple[Jet2, Jet2]:
        pts = as_points(pts)
        key = (pts.tobytes(), order)
        if key in self._cache:
            return self._cache[key]
        rel = self._relative_times(pts)
        seeds_all = np.stack([pts[self.trans[0]], pts[self.trans[1]]])
        seeds, seed_idx = np.unique(seeds_all, axis=1, return_inverse=True)
        taus, tau_idx = np.unique(rel, return_inverse=True)
        snaps = self.integrate_checkpoints(seeds, taus)
        state = np.empty((12, pts.shape[1]))
        for g, snap in enumerate(snaps):
            sel = tau_idx == g
            state[:, sel] = snap[:, seed_idx[sel]]
        jets = self._jets_from_state(state, pts, order)
        if len(self._cache) >= 16:
            self._cache.pop(next(iter(self._cache)))
        self._cache[key] = jets
        return jets

    def _jets_from_state(self, state: np.ndarray, pts: np.ndarray, order: int) -> tuple[Jet2, Jet2]:
        E, M = state[0], state[1]
        if order == 0:
            return Jet2(E.copy()), Jet2(M.copy())
        args = (pts[0], pts[1], pts[2], E, M)
        u, v, w = self.trans[0], self.trans[1], self.axis
        G, H = self._G, self._H
        g0, h0 = self._tab(G, args), self._tab(H, args)
        n = E.shape
        eg = np.zeros((3,) + n)
        mg = np.zeros((3,) + n)
        eg[u], eg[v], eg[w] = state[2], state[4], E * g0
        mg[u], mg[v], mg[w] = state[3], state[5], h0
        if order == 1:
            return Jet2(E.copy(), eg), Jet2(M.copy(), mg)
        g_m, h_e, h_m = self._tab(G, args, 4), self._tab(H, args, 3), self._tab(H, args, 4)
        eh = np.zeros((3, 3) + n)
        mh = np.zeros((3, 3) + n)
        eh[u, u], eh[u, v], eh[v, v] = state[6], state[8], state[10]
        mh[u, u], mh[u, v], mh[v, v] = state[7], state[9], state[11]
        for s_ax, (iE, iM) in ((u, (2, 3)), (v, (4, 5))):
            g_s = self._tab(G, args, s_ax)
            h_s = self._tab(H, args, s_ax)
            eh[s_ax, w] = state[iE] * g0 + E * (g_s + g_m * state[iM])
            mh[s_ax, w] = h_s + h_e * state[iE] + h_m * state[iM]
        eh[w, w] = E * g0**2 + E * (self._tab(G, args, w) + g_m * h0)
        mh[w, w] = self._tab(H, args, w) + h_e * E * g0 + h_m * h0
        eh[v, u], eh[w, u], eh[w, v] = eh[u, v], eh[u, w], eh[v, w]
        mh[v, u], mh[w, u], mh[w, v] = mh[u, v], mh[u, w], mh[v, w]
        return Jet2(E.copy(), eg, eh), Jet2(M.copy(), mg, mh)

    # -- field views ---------------------------------------------------------

    def perturbed_contact(self, label: str | None = None) -> ContactData:
        """ContactData of the realized metric: a' = mu eta^2, b' = eta^2."""
        base = self.cd

        def ab_fn(pts, order):
            etaj, muj = self.jets_at(pts, order)
            bprime = etaj * etaj
            aprime = muj * bprime
            a0, b0 = base.ab.jets(pts, order)
            return aprime + bprime * a0, bprime * b0

        return ContactData(base.chart, ABField(fn=ab_fn), label=label or f"{base.label}+realized")


# ---------------------------------------------------------------------------
# local realization


@dataclass(frozen=True)
class FlowBox:
    """A flow box Sigma_0 x [0, T]: seed surface at flow coordinate ``base``."""

    base: float
    extent: float
    seeds: tuple[int, int] = (12, 12)
    slices: int = 16


@dataclass
class RealizationSolution:
    contact: ContactData
    flow: FlowJetField
    seeds: np.ndarray
    times: np.ndarray
    grid_points: np.ndarray
    eta: np.ndarray
    mu: np.ndarray
    achieved_ricci: np.ndarray
    residual: np.ndarray
    sup_residual: float
    boundary_residual: float
    step: float
    summary: dict


def _transverse_seeds(dom: ChartDomain, axis: int, counts: tuple[int, int]) -> np.ndarray:
    trans = [i for i in range(3) if i != axis]
    axes = []
    for ax, n in zip(trans, counts):
        lo, hi = dom.bounds[ax]
        if not dom.periodic[ax]:
            lo, hi = lo + dom.margin, hi - dom.margin
        h = (hi - lo) / n
        axes.append(lo + h * (np.arange(n) + 0.5))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh])


def _check_admissibility(cd: ContactData, f_expr: sp.Expr, pts: np.ndarray, clamp_floor: float) -> int:
    """Reject f above theta'^2/2 - clamp_floor (exact-equality identity case excluded).

    Returns the count of near-clamp samples (within 10x the floor).
    """
    th = cd.theta
    if sp.simplify(f_expr - th**2 / 2) == 0:
        return 0
    fvals = ExprScalarField(f_expr)(pts)
    margin = th**2 / 2 - clamp_floor
    if (fvals > margin).any():
        bad = int(np.argmax(fvals))
        raise AdmissibilityError(
            f"f = {float(fvals[bad]):.8g} exceeds theta'^2/2 - clamp_floor = {margin:.8g} "
            f"at point {tuple(float(v) for v in pts[:, bad])}"
        )
    return int((fvals > th**2 / 2 - 10 * clamp_floor).sum())


def local_realize(
    cd: ContactData,
    f,
    box: FlowBox,
    step: float = 1e-3,
    tol: Tolerances = Tolerances(),
) -> RealizationSolution:
    """Solve the prescription ODEs on the flow box and verify with the oracle.

    The returned metric agrees with cd's metric on Sigma_0 exactly (initial
    conditions eta=1, mu=0) and satisfies |Ricci_*(X) - f| <= the integrator
    rung on the box, measured against the independent curvature oracle.
    """
    f_expr = parse_expression(f) if isinstance(f, str) else sp.sympify(getattr(f, "expr", f))
    axis = _translation_axis(cd)
    dom = cd.domain
    lo, hi = dom.bounds[axis]
    if not dom.periodic[axis] and not (lo <= box.base and box.base + box.extent <= hi):
        raise RealizationError(
            f"flow box [{box.base}, {box.base + box.extent}] leaves the chart axis ({lo}, {hi})"
        )
    seeds = _transverse_seeds(dom, axis, box.seeds)
    times = np.linspace(0.0, box.extent, box.slices + 1)

    th = cd.theta
    clamp_floor = CLAMP_FLOOR_FACTOR * th**2
    dense_t = np.arange(0.0, box.extent + step, max(step * 10, box.extent / 256))
    probe = np.concatenate([_positions_for(axis, box.base, t, seeds) for t in dense_t], axis=1)
    clamp_events = _check_admissibility(cd, f_expr, probe, clamp_floor)

    flow = FlowJetField(cd, f_expr, box.base, box.extent, step=step)
    snaps = flow.integrate_checkpoints(seeds, times)
    eta = np.stack([s[0] for s in snaps])
    mu = np.stack([s[1] for s in snaps])

    grid_pts = np.concatenate([flow._positions(t, seeds) for t in times], axis=1)
    cd_star = flow.perturbed_contact(label=f"{cd.label}+local_realize")
    ricci = ricci_reeb_oracle(cd_star, grid_pts)
    fvals = ExprScalarField(f_expr)(grid_pts)
    residual = np.abs(ricci - fvals)

    sigma0 = flow._positions(0.0, seeds)
    g0 = cd.metric().evaluate(sigma0)
    gstar0 = cd_star.metric().evaluate(sigma0)
    boundary = float(np.abs(g0 - gstar0).max())

    summary = {
        "rung": "integrator",
        "rung_tolerance": tol.integrator,
        "step": step,
        "sup_residual": float(residual.max()),
        "boundary_residual": boundary,
        "clamp_floor": clamp_floor,
        "clamp_events": clamp_events,
        "n_seeds": int(seeds.shape[1]),
        "n_slices": len(times),
        "eta_range": [float(eta.min()), float(eta.max())],
        "passed": bool(residual.max() <= tol.integrator and boundary <= 1e-12),
    }
    return RealizationSolution(
        contact=cd_star,
        flow=flow,
        seeds=seeds,
        times=times,
        grid_points=grid_pts,
        eta=eta,
        mu=mu,
        achieved_ricci=ricci,
        residual=residual,
        sup_residual=float(residual.max()),
        boundary_residual=boundary,
        step=step,
        summary=summary,
    )


# ---------------------------------------------------------------------------
# almost-global pipeline


def _smoothstep_jet(pts: np.ndarray, axis: int, period: float, delta: float, order: int) -> Jet2:
    """Quintic band interpolant h(tau): 0 up to period - delta, 1 at period."""
    tau = np.mod(pts[axis], period)
    s = np.clip((tau - (period - delta)) / delta, 0.0, 1.0)
    val = s**3 * (6 * s**2 - 15 * s + 10)
    if order == 0:
        return Jet2(val)
    inband = (s > 0) & (s < 1)
    d1 = np.where(inband, 30 * s**2 * (s - 1) ** 2 / delta, 0.0)
    grad = np.zeros((3,) + val.shape)
    grad[axis] = d1
    if order == 1:
        return Jet2(val, grad)
    d2 = np.where(inband, 60 * s * (s - 1) * (2 * s - 1) / delta**2, 0.0)
    hess = np.zeros((3, 3) + val.shape)
    hess[axis, axis] = d2
    return Jet2(val, grad, hess)


def _interpolated_contact(cd: ContactData, flow: FlowJetField, delta: float, label: str) -> ContactData:
    """J interpolated between the realized structure and cd's J on the band,
    re-normalized so the interpolant squares to -id (trace-free already; the
    columns are rescaled by 1/sqrt(det))."""
    axis = flow.axis
    period = cd.domain.length(axis)

    def ab_fn(pts, order):
        etaj, muj = flow.jets_at(pts, order)
        b_r = etaj * etaj
        a_r = muj * b_r
        h = _smoothstep_jet(pts, axis, period, delta, order)
        one = Jet2.constant(1.0, h, order=h.order)
        omh = one - h
        at = omh * a_r
        bt = omh * b_r + h
        ct = -(omh * (one + a_r * a_r) / b_r) - h
        det = -(at * at) - ct * bt
        if det.val.min() <= 0 or bt.val.min() <= 0:
            raise CompatibilityError(
                f"interpolated complex structure loses d(alpha)-compatibility "
                f"(min det {det.val.min():.3e}) for delta={delta}"
            )
        s = 1.0 / det.sqrt()
        ap, bp = at * s, bt * s
        a0, b0 = cd.ab.jets(pts, order)
        return ap + bp * a0, bp * b0

    return ContactData(cd.chart, ABField(fn=ab_fn), label=label)


@dataclass
class MetricSequence:
    contacts: list
    metrics: list
    pair_bounds: list
    pair_path_lengths: list
    epsilons: list
    deltas: list
    band_volumes: list
    residuals_outside: list
    volumes: list
    domain: ChartDomain
    limit: SemiMetricField
    singular_axis: int
    summary: dict


def almost_global_realize(
    cd: ContactData,
    f,
    epsilon: float,
    n_max: int,
    step: float = 1e-3,
    verify_grid: tuple[int, int, int] = (12, 12, 24),
    band_grid: tuple[int, int, int] = (12, 12, 16),
    tol: Tolerances = Tolerances(),
) -> MetricSequence:
    """Realize f away from the seed page, then shrink the interpolation band.

    Solves the prescription ODEs once around the fiber direction of the
    periodic chart (singular on the seed page Sigma_0), then for each
    epsilon_n = epsilon/2^n picks delta_n with band volume < epsilon_n/2 and
    interpolates the realized structure back to cd's J across the band.
    Records residuals outside the bands, volumes and consecutive distance
    upper bounds, and wraps the singular limit as a semi-metric.
    """
    f_expr = parse_expression(f) if isinstance(f, str) else sp.sympify(getattr(f, "expr", f))
    axis = _translation_axis(cd)
    dom = cd.domain
    if not dom.periodic[axis]:
        raise RealizationError("almost-global realization needs a periodic fiber axis")
    period = dom.length(axis)

    th = cd.theta
    clamp_floor = CLAMP_FLOOR_FACTOR * th**2
    sample = dom.sample_points()
    _check_admissibility(cd, f_expr, sample, clamp_floor)

    total_volume = metricspace.volume(cd, dom)
    if not (epsilon > 0 and epsilon / 2 < total_volume):
        raise RealizationError(
            f"epsilon={epsilon} incompatible with total volume {total_volume}"
        )

    flow = FlowJetField(cd, f_expr, base=dom.bounds[axis][0], extent=period, step=step)
    g_inf_cd = flow.perturbed_contact(label=f"{cd.label}+singular_limit")
    base0 = dom.bounds[axis][0]

    def singular_distance(pts):
        tau = np.mod(pts[axis] - base0, period)
        return np.minimum(tau, period - tau)

    limit = SemiMetricField(
        evaluate_fn=lambda pts: g_inf_cd.metric().evaluate(pts),
        degenerate_fn=lambda pts: singular_distance(pts) <= 0.5 * period / dom.grid[axis],
        domain=dom,
        singular_distance_fn=singular_distance,
        label="singular realized limit (seed page removed)",
    )

    vgrid = dom.with_grid(verify_grid)
    vpts = vgrid.sample_points()
    f_field = ExprScalarField(f_expr)

    contacts, metrics, deltas, band_vols, residuals, volumes = [], [], [], [], [], []
    epsilons = [epsilon / 2**n for n in range(n_max + 1)]
    for n, eps_n in enumerate(epsilons):
        delta = min(0.9 * (eps_n / 2) * period / total_volume, period / 4)
        label = f"{cd.label}+interp_n{n}"
        try:
            cd_n = _interpolated_contact(cd, flow, delta, label)
            cd_n.metric().evaluate(vpts[:, :1])
        except CompatibilityError:
            delta = delta / 2
            cd_n = _interpolated_contact(cd, flow, delta, label)
        band_vol = delta * total_volume / period
        if band_vol >= eps_n / 2:
            raise RealizationError(f"band volume {band_vol} not below epsilon_n/2 = {eps_n / 2}")
        outside = singular_distance(vpts) > 0
        tau_rel = np.mod(vpts[axis] - base0, period)
        outside &= tau_rel < period - delta
        ricci = ricci_reeb_oracle(cd_n, vpts[:, outside])
        resid = float(np.abs(ricci - f_field(vpts[:, outside])).max())
        contacts.append(cd_n)
        metrics.append(cd_n.metric())
        deltas.append(delta)
        band_vols.append(band_vol)
        residuals.append(resid)
        volumes.append(metricspace.volume(cd_n.metric(), dom))

    # consecutive distance bounds over the widest band of each pair
    pair_bounds, pair_lengths = [], []
    for n in range(n_max):
        delta = deltas[n]
        blo = base0 + period - delta
        band_dom = ChartDomain(
            (dom.bounds[0], dom.bounds[1], (blo, base0 + period)),
            (dom.periodic[0], dom.periodic[1], False) if axis == 2 else dom.periodic,
            band_grid,
            0.0,
        )
        clarke = metricspace.clarke_bound(metrics[n], metrics[n + 1], band_dom)
        plen = metricspace.path_length_upper(metrics[n], metrics[n + 1], band_dom, steps=8)
        pair_bounds.append(clarke["bound"])
        pair_lengths.append(plen)

    vol_drift = float(max(abs(v - total_volume) for v in volumes))
    summary = {
        "rung": "integrator",
        "rung_tolerance": tol.integrator,
        "epsilon": epsilon,
        "n_max": n_max,
        "step": step,
        "deltas": [float(d) for d in deltas],
        "band_volumes": [float(b) for b in band_vols],
        "residuals_outside_band": [float(r) for r in residuals],
        "max_residual": float(max(residuals)),
        "volumes": [float(v) for v in volumes],
        "volume_drift": vol_drift,
        "pair_clarke_bounds": [float(b) for b in pair_bounds],
        "pair_path_lengths": [float(b) for b in pair_lengths],
        "note": "band interpolation only; the chart has no binding, the box "
        "margin plays the role of the excluded neighborhood",
        "passed": bool(max(residuals) <= tol.integrator and vol_drift <= tol.quadrature),
    }
    return MetricSequence(
        contacts=contacts,
        metrics=metrics,
        pair_bounds=pair_bounds,
        pair_path_lengths=pair_lengths,
        epsilons=epsilons,
        deltas=deltas,
        band_volumes=band_vols,
        residuals_outside=residuals,
        volumes=volumes,
        domain=dom,
        limit=limit,
        singular_axis=axis,
        summary=summary,
    )
