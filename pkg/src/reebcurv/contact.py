"""Contact forms, Reeb fields, compatible metrics and model charts.

A compatible metric is determined by a contact form alpha, a rotation
constant theta' > 0 and a complex structure J on xi = ker(alpha):

    g(u, v) = (1/theta') * d(alpha)(u, Jv) + alpha(u) * alpha(v)

J is extended to the whole tangent space by projecting along the Reeb field
(so J(X) = 0).  Internally every J in this library is stored as a trace-free,
determinant-one endomorphism field (a, b) acting on a fixed analytic frame
(e0, J0 e0) of xi:

    J e0 = a e0 + b J0e0,   J (J0e0) = c e0 - a J0e0,   c = -(1 + a^2) / b

which makes J^2 = -id automatic and keeps the volume form of g independent
of (a, b).  Models carry a = 0, b = 1; perturbed and solver-built metrics
carry jet-backed (a, b) fields.

ContactData is immutable after validation and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import sympy as sp

from .exprlang import COORDS
from .fields import (
    ChartDomain,
    ExprScalarField,
    FieldError,
    OneForm,
    ScalarField,
    VectorField,
    as_points,
    exterior_derivative,
    exterior_derivative_exprs,
)
from .jets import Jet2, jet_where

__all__ = [
    "NonContactError",
    "ModelError",
    "CompatibilityError",
    "FrameSeedingError",
    "AnalyticContactChart",
    "ABField",
    "ContactData",
    "CompatibleMetric",
    "ExplicitMetric",
    "MetricJets",
    "FramePoint",
    "verify_contact",
    "reeb_field",
    "build_compatible_metric",
    "model_manifold",
    "MODEL_NAMES",
]

SEED_DEGENERACY_FLOOR = 1e-8


class NonContactError(FieldError):
    pass


class ModelError(FieldError):
    pass


class CompatibilityError(FieldError):
    pass


class FrameSeedingError(FieldError):
    pass


# ---------------------------------------------------------------------------
# analytic chart data


class _ExprTable:
    """Lazy list of ExprScalarFields for a sympy Matrix of components."""

    def __init__(self, exprs: Sequence[sp.Expr]):
        self.exprs = list(exprs)
        self._fields = [None] * len(self.exprs)

    def field(self, i: int) -> ExprScalarField:
        if self._fields[i] is None:
            self._fields[i] = ExprScalarField(self.exprs[i])
        return self._fields[i]

    def jets(self, pts, order: int) -> list[Jet2]:
        return [self.field(i).jet(pts, order) for i in range(len(self.exprs))]

    def values(self, pts) -> np.ndarray:
        return np.stack([self.field(i)(pts) for i in range(len(self.exprs))])


class AnalyticContactChart:
    """Symbolic base data of a contact chart: alpha, Reeb field, xi-frame.

    The frame (e0, J0e0) must satisfy d(alpha)(e0, J0e0) = theta everywhere.
    """

    def __init__(
        self,
        alpha: sp.Matrix,
        theta: float,
        e0: sp.Matrix,
        j0e0: sp.Matrix,
        reeb: sp.Matrix,
        domain: ChartDomain,
        label: str = "chart",
    ):
        self.alpha_exprs = sp.Matrix(alpha)
        self.theta = float(theta)
        self.e0_exprs = sp.Matrix(e0)
        self.j0e0_exprs = sp.Matrix(j0e0)
        self.reeb_exprs = sp.Matrix(reeb)
        self.domain = domain
        self.label = label
        if self.theta <= 0:
            raise ModelError("theta' must be positive")

        self.F_exprs = exterior_derivative_exprs(self.alpha_exprs)
        th = sp.nsimplify(self.theta) if float(theta) in (2.0,) else self.theta
        self._p_exprs = sp.Matrix(
            [
                sp.simplify(sum(self.F_exprs[j, k] * self.j0e0_exprs[k] for k in range(3)) / th)
                for j in range(3)
            ]
        )
        self._q_exprs = sp.Matrix(
            [
                sp.simplify(sum(self.e0_exprs[k] * self.F_exprs[k, j] for k in range(3)) / th)
                for j in range(3)
            ]
        )
        wedge = sum(
            self.alpha_exprs[i]
            * self.F_exprs[(i + 1) % 3, (i + 2) % 3]
            for i in range(3)
        )
        self.wedge_expr = sp.simplify(wedge)

        self._alpha = _ExprTable(self.alpha_exprs)
        self._X = _ExprTable(self.reeb_exprs)
        self._e0 = _ExprTable(self.e0_exprs)
        self._j0e0 = _ExprTable(self.j0e0_exprs)
        self._p = _ExprTable(self._p_exprs)
        self._q = _ExprTable(self._q_exprs)
        self._F = _ExprTable([self.F_exprs[i, j] for i in range(3) for j in range(3)])
        self._wedge = ExprScalarField(self.wedge_expr)

    # jet accessors (component lists of Jet2)
    def alpha_jets(self, pts, order=0):
        return self._alpha.jets(pts, order)

    def X_jets(self, pts, order=0):
        return self._X.jets(pts, order)

    def e0_jets(self, pts, order=0):
        return self._e0.jets(pts, order)

    def j0e0_jets(self, pts, order=0):
        return self._j0e0.jets(pts, order)

    def p_jets(self, pts, order=0):
        return self._p.jets(pts, order)

    def q_jets(self, pts, order=0):
        return self._q.jets(pts, order)

    def F_jets(self, pts, order=0):
        flat = self._F.jets(pts, order)
        return [[flat[3 * i + j] for j in range(3)] for i in range(3)]

    def wedge_coefficient(self, pts) -> np.ndarray:
        return self._wedge(pts)

    def alpha_form(self) -> OneForm:
        return OneForm(list(self.alpha_exprs))

    def reeb_vector_field(self) -> VectorField:
        return VectorField(list(self.reeb_exprs))


# ---------------------------------------------------------------------------
# frame endomorphism fields


class ABField:
    """The (a, b) coefficients of J on the base frame, as a jet provider."""

    def __init__(self, fn: Callable | None = None, exprs: tuple[sp.Expr, sp.Expr] | None = None):
        if fn is None and exprs is None:
            raise FieldError("ABField needs a jet callable or sympy expressions")
        self.exprs = None
        if exprs is not None:
            a_expr, b_expr = sp.sympify(exprs[0]), sp.sympify(exprs[1])
            self.exprs = (a_expr, b_expr)
            if fn is None:
                fa, fb = ExprScalarField(a_expr), ExprScalarField(b_expr)
                fn = lambda pts, order: (fa.jet(pts, order), fb.jet(pts, order))
        self._fn = fn

    @classmethod
    def identity(cls) -> "ABField":
        return cls(exprs=(sp.Integer(0), sp.Integer(1)))

    @property
    def is_analytic(self) -> bool:
        return self.exprs is not None

    def jets(self, pts, order: int = 2) -> tuple[Jet2, Jet2]:
        return self._fn(pts, order)


# ---------------------------------------------------------------------------
# metrics


@dataclass
class MetricJets:
    """Packed metric derivative data: g (3,3,N), dg[k,i,j] = d_k g_ij, d2g[k,l,i,j]."""

    g: np.ndarray
    dg: np.ndarray | None = None
    d2g: np.ndarray | None = None


class CompatibleMetric:
    """The compatible metric of a ContactData, assembled from frame jets."""

    def __init__(self, cd: "ContactData"):
        self.cd = cd

    @property
    def domain(self) -> ChartDomain:
        return self.cd.domain

    def component_jets(self, pts, order: int = 2) -> list[list[Jet2]]:
        pts = as_points(pts)
        ch = self.cd.chart
        a, b, c = self.cd.abc_jets(pts, order)
        p = ch.p_jets(pts, order)
        q = ch.q_jets(pts, order)
        al = ch.alpha_jets(pts, order)
        minus_c = -c
        comps = [[None] * 3 for _ in range(3)]
        for i in range(3):
            for j in range(i, 3):
                gij = (
                    b * (p[i] * p[j])
                    + minus_c * (q[i] * q[j])
                    - a * (p[i] * q[j] + q[i] * p[j])
                    + al[i] * al[j]
                )
                comps[i][j] = comps[j][i] = gij
        return comps

    def jets(self, pts, order: int = 2) -> MetricJets:
        comps = self.component_jets(pts, order)
        n = comps[0][0].val.shape
        g = np.empty((3, 3) + n)
        dg = np.empty((3, 3, 3) + n) if order >= 1 else None
        d2g = np.empty((3, 3, 3, 3) + n) if order >= 2 else None
        for i in range(3):
            for j in range(3):
                g[i, j] = comps[i][j].val
                if order >= 1:
                    dg[:, i, j] = comps[i][j].grad
                if order >= 2:
                    d2g[:, :, i, j] = comps[i][j].hess
        return MetricJets(g, dg, d2g)

    def evaluate(self, pts) -> np.ndarray:
        return self.jets(pts, order=0).g

    def volume_density(self, pts) -> np.ndarray:
        g = self.evaluate(pts)
        det = np.linalg.det(np.moveaxis(g, -1, 0))
        return np.sqrt(det)


class ExplicitMetric:
    """A symmetric metric given by six component fields (analytic or callable)."""

    def __init__(self, components, domain: ChartDomain):
        # components: 3x3 nested sequence; upper triangle is used
        comp = [[None] * 3 for _ in range(3)]
        for i in range(3):
            for j in range(i, 3):
                entry = components[i][j]
                if not isinstance(entry, ScalarField):
                    entry = ExprScalarField(entry)
                comp[i][j] = comp[j][i] = entry
        self.components = comp
        self.domain = domain

    def jets(self, pts, order: int = 2) -> MetricJets:
        pts = as_points(pts)
        n = None
        g = dg = d2g = None
        for i in range(3):
            for j in range(i, 3):
                jet = self.components[i][j].jet(pts, order)
                if n is None:
                    n = jet.val.shape
                    g = np.empty((3, 3) + n)
                    dg = np.empty((3, 3, 3) + n) if order >= 1 else None
                    d2g = np.empty((3, 3, 3, 3) + n) if order >= 2 else None
                g[i, j] = g[j, i] = jet.val
                if order >= 1:
                    dg[:, i, j] = dg[:, j, i] = jet.grad
                if order >= 2:
                    d2g[:, :, i, j] = d2g[:, :, j, i] = jet.hess
        return MetricJets(g, dg, d2g)

    def evaluate(self, pts) -> np.ndarray:
        return self.jets(pts, order=0).g

    def volume_density(self, pts) -> np.ndarray:
        g = self.evaluate(pts)
        return np.sqrt(np.linalg.det(np.moveaxis(g, -1, 0)))


# ---------------------------------------------------------------------------
# contact data


@dataclass(frozen=True)
class FramePoint:
    """An oriented adapted orthonormal frame (e, Je, X) at one or many points."""

    point: np.ndarray
    e: np.ndarray
    je: np.ndarray
    X: np.ndarray
    theta: float


class ContactData:
    """Contact form + rotation constant + complex structure on a chart."""

    def __init__(self, chart: AnalyticContactChart, ab: ABField | None = None, label: str | None = None):
        self.chart = chart
        self.ab = ab if ab is not None else ABField.identity()
        self.label = label or chart.label

    @property
    def theta(self) -> float:
        return self.chart.theta

    @property
    def domain(self) -> ChartDomain:
        return self.chart.domain

    @property
    def is_analytic(self) -> bool:
        return self.ab.is_analytic

    def metric(self) -> CompatibleMetric:
        return CompatibleMetric(self)

    def abc_jets(self, pts, order: int = 2) -> tuple[Jet2, Jet2, Jet2]:
        a, b = self.ab.jets(pts, order)
        if (b.val <= 0).any():
            raise CompatibilityError("frame coefficient b = |e0|_g^2 must stay positive")
        c = -(Jet2.constant(1.0, a, order=a.order) + a * a) / b
        return a, b, c

    # -- J as an endomorphism ----------------------------------------------

    def xi_coefficients(self, vjets: list[Jet2], pts, order: int = 2) -> tuple[Jet2, Jet2]:
        """Coefficients (pv, qv) of the xi-part of v in the base frame.

        pv = d(alpha)(v, J0e0)/theta, qv = d(alpha)(e0, v)/theta; both kill
        the Reeb component automatically since d(alpha)(X, .) = 0.
        """
        ch = self.chart
        F = ch.F_jets(pts, order)
        j0 = ch.j0e0_jets(pts, order)
        e0 = ch.e0_jets(pts, order)
        zero = Jet2.constant(0.0, vjets[0], order=min(j.order for j in vjets))
        pv, qv = zero, zero
        for i in range(3):
            for j in range(3):
                pv = pv + F[i][j] * vjets[i] * j0[j]
                qv = qv + F[i][j] * e0[i] * vjets[j]
        inv = 1.0 / self.theta
        return pv * inv, qv * inv

    def j_apply_jets(self, vjets: list[Jet2], pts, order: int = 2) -> list[Jet2]:
        """Component jets of J(v) for a vector with component jets vjets."""
        a, b, c = self.abc_jets(pts, order)
        pv, qv = self.xi_coefficients(vjets, pts, order)
        e0 = self.chart.e0_jets(pts, order)
        j0 = self.chart.j0e0_jets(pts, order)
        ce = a * pv + c * qv
        cj = b * pv - a * qv
        return [ce * e0[i] + cj * j0[i] for i in range(3)]

    # -- frames --------------------------------------------------------------

    def seeded_frame_jets(self, pts, order: int = 2) -> tuple[list[Jet2], list[Jet2], np.ndarray]:
        """The deterministic orthonormal frame field (e, Je) from coordinate seeding.

        The first chart coordinate field is projected onto xi along X and
        normalized with d(alpha)(e, Je) = theta; points where the projection
        degenerates (squared g-norm < 1e-8) fall back to the second
        coordinate field.  Returns component jets plus the mask of fallback
        points.
        """
        pts = as_points(pts)
        a, b, c = self.abc_jets(pts, order)
        ch = self.chart
        p = ch.p_jets(pts, order)
        q = ch.q_jets(pts, order)
        e0 = ch.e0_jets(pts, order)
        j0 = ch.j0e0_jets(pts, order)

        def norm2(pk, qk):
            return b * (pk * pk) - a * (pk * qk) * 2.0 - c * (qk * qk)

        n1 = norm2(p[0], q[0])
        n2 = norm2(p[1], q[1])
        use2 = n1.val < SEED_DEGENERACY_FLOOR
        if (use2 & (n2.val < SEED_DEGENERACY_FLOOR)).any():
            raise FrameSeedingError("both coordinate seeds degenerate on xi")
        pk = jet_where(~use2, p[0], p[1])
        qk = jet_where(~use2, q[0], q[1])
        nn = jet_where(~use2, n1, n2)
        s = 1.0 / nn.sqrt()
        ce, cj = (a * pk + c * qk) * s, (b * pk - a * qk) * s
        pe, qe = pk * s, qk * s
        e = [pe * e0[i] + qe * j0[i] for i in range(3)]
        je = [ce * e0[i] + cj * j0[i] for i in range(3)]
        return e, je, use2

    def unit_frame_jets(self, pts, order: int = 2) -> tuple[list[Jet2], list[Jet2]]:
        """Component jets of the canonical g-unit frame (e0/sqrt(b), J(e0)/sqrt(b)).

        This is the frame the perturbation machinery acts on; unlike the
        seeded frame it never switches seeds, so it is smooth wherever the
        (a, b) fields are.
        """
        pts = as_points(pts)
        a, b, c = self.abc_jets(pts, order)
        e0 = self.chart.e0_jets(pts, order)
        j0 = self.chart.j0e0_jets(pts, order)
        s = 1.0 / b.sqrt()
        e = [e0[i] * s for i in range(3)]
        je = [(a * s) * e0[i] + (b * s) * j0[i] for i in range(3)]
        return e, je

    def frame_point(self, point) -> FramePoint:
        pts = self.domain.wrap(point)
        e, je, _ = self.seeded_frame_jets(pts, order=0)
        X = np.stack([j.val for j in self.chart.X_jets(pts, order=0)])
        return FramePoint(
            point=pts,
            e=np.stack([j.val for j in e]),
            je=np.stack([j.val for j in je]),
            X=X,
            theta=self.theta,
        )

    # -- perturbation composition -------------------------------------------

    def compose_frame_endomorphism(self, aprime, bprime, label: str | None = None) -> "ContactData":
        """New ContactData whose J acts by (a', b') on this data's unit frame.

        The composition into base-frame coefficients is a = a' + b' a0,
        b = b' b0.  ``aprime``/``bprime`` are jet providers (ScalarField-like
        with .jet) or sympy expressions.
        """
        base_ab = self.ab

        def lift(obj):
            if isinstance(obj, ScalarField):
                return obj, getattr(obj, "expr", None)
            return ExprScalarField(obj), sp.sympify(obj)

        ap_field, ap_expr = lift(aprime)
        bp_field, bp_expr = lift(bprime)

        exprs = None
        if base_ab.exprs is not None and ap_expr is not None and bp_expr is not None:
            a0, b0 = base_ab.exprs
            exprs = (sp.simplify(ap_expr + bp_expr * a0), sp.simplify(bp_expr * b0))

        def fn(pts, order):
            a0, b0 = base_ab.jets(pts, order)
            ap = ap_field.jet(pts, order)
            bp = bp_field.jet(pts, order)
            return ap + bp * a0, bp * b0

        return ContactData(self.chart, ABField(fn=fn, exprs=exprs), label=label or self.label)

    def unit_frame_exprs(self) -> tuple[sp.Matrix, sp.Matrix]:
        """Symbolic g-unit frame (e0/sqrt(b), (a e0 + b J0e0)/sqrt(b)); analytic data only."""
        if not self.is_analytic:
            raise CompatibilityError("unit frame expressions require analytic (a, b) fields")
        a, b = self.ab.exprs
        e = self.chart.e0_exprs / sp.sqrt(b)
        je = (a * self.chart.e0_exprs + b * self.chart.j0e0_exprs) / sp.sqrt(b)
        return sp.Matrix(e), sp.Matrix(je)

    # -- validation -----------------------------------------------------------

    def validate(self, pts=None) -> dict:
        """Grid check of all structure invariants; worst-case residuals."""
        pts = self.domain.sample_points() if pts is None else as_points(pts)
        ch = self.chart
        wedge = ch.wedge_coefficient(pts)
        alpha = np.stack([j.val for j in ch.alpha_jets(pts, order=0)])
        X = np.stack([j.val for j in ch.X_jets(pts, order=0)])
        F = exterior_derivative(ch.alpha_form(), pts).coeff
        alpha_X = np.einsum("i...,i...->...", alpha, X)
        dalpha_X = np.einsum("ij...,i...->j...", F, X)
        a, b, c = self.abc_jets(pts, order=0)
        jsq_residual = np.abs(-(a.val**2) - c.val * b.val - 1.0)

        mj = self.metric().jets(pts, order=0)
        gmat = np.moveaxis(mj.g, -1, 0)
        eigs = np.linalg.eigvalsh(gmat)
        det = np.linalg.det(gmat)
        vol_resid = np.abs(np.sqrt(np.abs(det)) - wedge / self.theta)

        report = {
            "label": self.label,
            "n_points": int(pts.shape[1]),
            "min_wedge_coefficient": float(wedge.min()),
            "max_abs_alpha_X_minus_1": float(np.abs(alpha_X - 1).max()),
            "max_abs_dalpha_X": float(np.abs(dalpha_X).max()),
            "max_abs_J_squared_plus_id": float(jsq_residual.max()),
            "min_b": float(b.val.min()),
            "min_metric_eigenvalue": float(eigs.min()),
            "max_volume_form_residual": float(vol_resid.max()),
        }
        report["passed"] = bool(
            report["min_wedge_coefficient"] > 0
            and report["max_abs_alpha_X_minus_1"] < 1e-9
            and report["max_abs_dalpha_X"] < 1e-9
            and report["max_abs_J_squared_plus_id"] < 1e-9
            and report["min_b"] > 0
            and report["min_metric_eigenvalue"] > 0
            and report["max_volume_form_residual"] < 1e-8
        )
        return report


# ---------------------------------------------------------------------------
# operations


def verify_contact(alpha: OneForm, dom: ChartDomain) -> dict:
    """Grid minimum of the alpha ^ d(alpha) coefficient against dx^dy^dz."""
    pts = dom.sample_points()
    F = exterior_derivative(alpha, pts).coeff
    avals = alpha.values(pts)
    coeff = avals[0] * F[1, 2] + avals[1] * F[2, 0] + avals[2] * F[0, 1]
    idx = int(np.argmin(coeff))
    return {
        "min_coefficient": float(coeff[idx]),
        "argmin": [float(v) for v in pts[:, idx]],
        "passed": bool(coeff.min() > 0),
    }


def reeb_field(alpha: OneForm, point, residual_tol: float = 1e-10) -> np.ndarray:
    """Solve d(alpha)(X, .) = 0, alpha(X) = 1 at the given point(s).

    The kernel of the antisymmetric coefficient matrix F is spanned by
    (F_yz, F_zx, F_xy); dividing by alpha of that vector enforces the
    normalization.  Singular (non-contact) points are rejected.
    """
    pts = as_points(point)
    F = exterior_derivative(alpha, pts).coeff
    v = np.stack([F[1, 2], F[2, 0], F[0, 1]])
    avals = alpha.values(pts)
    denom = np.einsum("i...,i...->...", avals, v)
    if (np.abs(denom) < 1e-12).any():
        raise NonContactError("alpha ^ d(alpha) vanishes: Reeb system singular at a requested point")
    X = v / denom
    resid = np.abs(np.einsum("ij...,i...->j...", F, X)).max()
    norm_resid = np.abs(np.einsum("i...,i...->...", avals, X) - 1).max()
    if max(resid, norm_resid) > residual_tol:
        raise NonContactError(
            f"Reeb solve residual {max(resid, norm_resid):.3e} above {residual_tol:.1e}"
        )
    return X


def build_compatible_metric(cd: ContactData) -> CompatibleMetric:
    """Validated compatible metric of the given contact data."""
    report = cd.validate()
    if report["min_metric_eigenvalue"] <= 0:
        pts = cd.domain.sample_points()
        g = cd.metric().evaluate(pts)
        eigs = np.linalg.eigvalsh(np.moveaxis(g, -1, 0))
        bad = int(np.argmin(eigs.min(axis=1)))
        raise CompatibilityError(
            f"metric not positive definite; first failure near {tuple(pts[:, bad])}"
        )
    if not report["passed"]:
        raise CompatibilityError(f"contact data invariants violated: {report}")
    return cd.metric()


MODEL_NAMES = ("heisenberg_r3", "torus_xi_n", "mapping_torus_box")


def model_manifold(name: str, **params) -> ContactData:
    """Model contact charts with known ground truth.

    heisenberg_r3      (dz - y dx, theta'=2 by default, X = d_z) on a box
    torus_xi_n         (cos(2 pi n z) dx - sin(2 pi n z) dy, theta' = 2 pi n)
                       on the unit periodic cube
    mapping_torus_box  (d tau - y dx, tau periodic, theta'=2) on B_xy x S^1;
                       the pages {tau = const} are transverse to X = d_tau
    """
    x, y, z = COORDS
    grid = tuple(params.pop("grid", (48, 48, 48)))
    margin = float(params.pop("margin", 0.0))

    if name == "heisenberg_r3":
        theta = float(params.pop("theta_prime", 2.0))
        L = float(params.pop("L", 1.0))
        _reject_extra(name, params)
        if theta <= 0 or L <= 0:
            raise ModelError("heisenberg_r3 needs theta_prime > 0 and L > 0")
        dom = ChartDomain(((0.0, L), (0.0, L), (0.0, L)), (False, False, False), grid, margin)
        s = sp.sqrt(theta if theta != 2.0 else sp.Integer(2))
        chart = AnalyticContactChart(
            alpha=sp.Matrix([-y, 0, 1]),
            theta=theta,
            e0=sp.Matrix([s, 0, s * y]),
            j0e0=sp.Matrix([0, s, 0]),
            reeb=sp.Matrix([0, 0, 1]),
            domain=dom,
            label="heisenberg_r3",
        )
        return ContactData(chart)

    if name == "torus_xi_n":
        n = params.pop("n", 1)
        _reject_extra(name, params)
        if not isinstance(n, int) or n < 1:
            raise ModelError("torus_xi_n needs a positive integer n")
        theta = 2 * np.pi * n
        dom = ChartDomain(((0.0, 1.0), (0.0, 1.0), (0.0, 1.0)), (True, True, True), grid, margin)
        c, s = sp.cos(2 * sp.pi * n * z), sp.sin(2 * sp.pi * n * z)
        chart = AnalyticContactChart(
            alpha=sp.Matrix([c, -s, 0]),
            theta=theta,
            e0=sp.Matrix([s, c, 0]),
            j0e0=sp.Matrix([0, 0, 1]),
            reeb=sp.Matrix([c, -s, 0]),
            domain=dom,
            label=f"torus_xi_{n}",
        )
        return ContactData(chart)

    if name == "mapping_torus_box":
        L = float(params.pop("L", 1.0))
        period = float(params.pop("period", 1.0))
        _reject_extra(name, params)
        if L <= 0 or period <= 0:
            raise ModelError("mapping_torus_box needs L > 0 and period > 0")
        theta = 2.0
        dom = ChartDomain(
            ((0.0, L), (0.0, L), (0.0, period)), (False, False, True), grid, margin
        )
        s = sp.sqrt(sp.Integer(2))
        chart = AnalyticContactChart(
            alpha=sp.Matrix([-y, 0, 1]),
            theta=theta,
            e0=sp.Matrix([s, 0, s * y]),
            j0e0=sp.Matrix([0, s, 0]),
            reeb=sp.Matrix([0, 0, 1]),
            domain=dom,
            label="mapping_torus_box",
        )
        return ContactData(chart)

    raise ModelError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")


def _reject_extra(name: str, params: dict):
    if params:
        raise ModelError(f"unknown parameters for {name}: {sorted(params)}")
