"""Chart calculus on (possibly periodic) box domains.

Scalar/vector/form fields with two derivative backends:

* analytic jets -- components given as sympy expressions; partials are exact
  (preferred, used for all model manifolds);
* finite differences -- components given as plain callables; partials by
  central differences with one Richardson level, step ``h`` and ``h/2``
  cross-checked against a disagreement tolerance.

Points are passed around as arrays of shape (3, N).  All evaluations are
pure; grid sweeps may be partitioned freely across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy as sp

from .exprlang import COORDS, parse_expression
from .jets import Jet2

__all__ = [
    "FieldError",
    "OutsideDomainError",
    "DerivativeDisagreement",
    "ChartDomain",
    "ScalarField",
    "ExprScalarField",
    "CallableScalarField",
    "FuncJetField",
    "VectorField",
    "OneForm",
    "TwoFormValue",
    "as_points",
    "evaluate_jet",
    "lie_bracket",
    "lie_bracket_exprs",
    "exterior_derivative",
    "exterior_derivative_exprs",
    "two_form_divergence",
    "integrate_density",
    "export_grid_csv",
]

FD_STEP_DEFAULT = 1e-4
FD_TOL_DEFAULT = 1e-6


class FieldError(Exception):
    pass


class OutsideDomainError(FieldError):
    pass


class DerivativeDisagreement(FieldError):
    """Finite-difference step sizes h and h/2 disagree beyond tolerance."""


def as_points(pts) -> np.ndarray:
    """Coerce to shape (3, N) float array (single points become N=1)."""
    arr = np.asarray(pts, dtype=float)
    if arr.ndim == 1 and arr.shape[0] == 3:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != 3:
        raise FieldError(f"points must have shape (3,) or (3, N), got {arr.shape}")
    return arr


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class ChartDomain:
    """A (possibly periodic) coordinate box with a sampling grid.

    ``margin`` is a boundary band excluded from all assertions and from
    quadrature on non-periodic axes.  Periodic axes are circles whose period
    is the interval length; coordinates are reduced modulo the period before
    evaluation.
    """

    bounds: tuple[tuple[float, float], tuple[float, float], tuple[float, float]]
    periodic: tuple[bool, bool, bool] = (False, False, False)
    grid: tuple[int, int, int] = (48, 48, 48)
    margin: float = 0.0

    def __post_init__(self):
        if len(self.bounds) != 3 or len(self.periodic) != 3 or len(self.grid) != 3:
            raise FieldError("bounds, periodic and grid must each have three entries")
        for lo, hi in self.bounds:
            if not hi > lo:
                raise FieldError(f"interval ({lo}, {hi}) must have positive length")
        for n in self.grid:
            if n < 4:
                raise FieldError("grid counts must be >= 4 per axis")
        if self.margin < 0:
            raise FieldError("margin must be nonnegative")
        for axis in range(3):
            if not self.periodic[axis] and self.margin >= 0.5 * self.length(axis):
                raise FieldError("margin must be < half of every non-periodic axis length")

    def length(self, axis: int) -> float:
        lo, hi = self.bounds[axis]
        return hi - lo

    @property
    def lengths(self) -> np.ndarray:
        return np.array([self.length(i) for i in range(3)])

    def wrap(self, pts) -> np.ndarray:
        """Reduce periodic coordinates modulo their period (value-exact axes)."""
        out = as_points(pts).copy()
        for axis in range(3):
            if self.periodic[axis]:
                lo, hi = self.bounds[axis]
                out[axis] = lo + np.mod(out[axis] - lo, hi - lo)
        return out

    def contains(self, pts, tol: float = 0.0) -> np.ndarray:
        p = as_points(pts)
        ok = np.ones(p.shape[1], dtype=bool)
        for axis in range(3):
            if self.periodic[axis]:
                continue
            lo, hi = self.bounds[axis]
            ok &= (p[axis] >= lo - tol) & (p[axis] <= hi + tol)
        return ok

    def require_inside(self, pts):
        p = self.wrap(pts)
        ok = self.contains(p)
        if not ok.all():
            bad = p[:, ~ok][:, 0]
            raise OutsideDomainError(f"point {tuple(bad)} outside non-periodic bounds {self.bounds}")
        return p

    def _axis_centers(self, axis: int, n: int | None = None) -> tuple[np.ndarray, float]:
        lo, hi = self.bounds[axis]
        if not self.periodic[axis]:
            lo, hi = lo + self.margin, hi - self.margin
        n = self.grid[axis] if n is None else n
        h = (hi - lo) / n
        return lo + h * (np.arange(n) + 0.5), h

    def cell_centers(self, refine: int = 1) -> tuple[np.ndarray, float]:
        """Midpoint-rule nodes over the margin-reduced box and the cell volume."""
        axes, steps = [], []
        for axis in range(3):
            c, h = self._axis_centers(axis, self.grid[axis] * refine)
            axes.append(c)
            steps.append(h)
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh])
        return pts, steps[0] * steps[1] * steps[2]

    def sample_points(self) -> np.ndarray:
        """Assertion grid: same midpoint nodes as quadrature (margin excluded)."""
        return self.cell_centers()[0]

    def with_grid(self, grid: Sequence[int]) -> "ChartDomain":
        return ChartDomain(self.bounds, self.periodic, tuple(int(n) for n in grid), self.margin)


# ---------------------------------------------------------------------------
# scalar fields


def _lambdify(expr: sp.Expr) -> Callable:
    fn = sp.lambdify(COORDS, expr, modules="numpy")

    def call(x, y, z):
        out = np.asarray(fn(x, y, z), dtype=float)
        if out.shape != np.shape(x):
            out = np.broadcast_to(out, np.shape(x))
        return out

    return call


class ScalarField:
    """Base: deterministic, side-effect free evaluator with jet access."""

    def jet(self, pts, order: int = 2) -> Jet2:
        raise NotImplementedError

    def __call__(self, pts) -> np.ndarray:
        return self.jet(pts, order=0).val


class ExprScalarField(ScalarField):
    """Analytic-jet backend: exact partials from a sympy expression."""

    def __init__(self, expr):
        if isinstance(expr, str):
            expr = parse_expression(expr)
        self.expr = sp.sympify(expr)
        self._f0 = _lambdify(self.expr)
        self._f1 = None
        self._f2 = None

    def _grad_fns(self):
        if self._f1 is None:
            self._f1 = [_lambdify(sp.diff(self.expr, c)) for c in COORDS]
        return self._f1

    def _hess_fns(self):
        if self._f2 is None:
            self._f2 = [
                [_lambdify(sp.diff(self.expr, COORDS[i], COORDS[j])) for j in range(3)]
                for i in range(3)
            ]
        return self._f2

    def jet(self, pts, order: int = 2) -> Jet2:
        x, y, z = as_points(pts)
        val = self._f0(x, y, z)
        grad = hess = None
        if order >= 1:
            grad = np.stack([f(x, y, z) for f in self._grad_fns()])
        if order >= 2:
            fns = self._hess_fns()
            hess = np.empty((3, 3) + val.shape)
            for i in range(3):
                for j in range(i, 3):
                    hess[i, j] = hess[j, i] = fns[i][j](x, y, z)
        return Jet2(val, grad, hess)

    def diff(self, axis: int) -> "ExprScalarField":
        return ExprScalarField(sp.diff(self.expr, COORDS[axis]))


class FuncJetField(ScalarField):
    """Adapter: a scalar field backed by an arbitrary jet-producing callable."""

    def __init__(self, fn: Callable):
        self.fn = fn

    def jet(self, pts, order: int = 2) -> Jet2:
        return self.fn(as_points(pts), order)


class CallableScalarField(ScalarField):
    """Finite-difference backend for user-supplied evaluators.

    Central differences at steps ``h`` and ``h/2`` with one Richardson level;
    if the two step sizes disagree beyond ``tol`` (relative to the magnitude
    of the derivative) the evaluation is flagged via DerivativeDisagreement.
    """

    def __init__(self, fn: Callable, h: float = FD_STEP_DEFAULT, tol: float = FD_TOL_DEFAULT):
        self.fn = fn
        self.h = float(h)
        self.tol = float(tol)

    def _eval(self, x, y, z):
        return np.asarray(self.fn(x, y, z), dtype=float)

    def _fd_pass(self, x, y, z, order, h):
        f0 = self._eval(x, y, z)
        grad = np.empty((3,) + f0.shape)
        hess = np.empty((3, 3) + f0.shape) if order >= 2 else None
        shifts = []
        for axis in range(3):
            dp = [x.copy(), y.copy(), z.copy()]
            dm = [x.copy(), y.copy(), z.copy()]
            dp[axis] = dp[axis] + h
            dm[axis] = dm[axis] - h
            fp, fm = self._eval(*dp), self._eval(*dm)
            shifts.append((fp, fm))
            grad[axis] = (fp - fm) / (2 * h)
            if order >= 2:
                hess[axis, axis] = (fp - 2 * f0 + fm) / h**2
        if order >= 2:
            for i in range(3):
                for j in range(i + 1, 3):
                    pp = [x.copy(), y.copy(), z.copy()]
                    pm = [x.copy(), y.copy(), z.copy()]
                    mp = [x.copy(), y.copy(), z.copy()]
                    mm = [x.copy(), y.copy(), z.copy()]
                    for arr, si, sj in ((pp, h, h), (pm, h, -h), (mp, -h, h), (mm, -h, -h)):
                        arr[i] = arr[i] + si
                        arr[j] = arr[j] + sj
                    hess[i, j] = hess[j, i] = (
                        self._eval(*pp) - self._eval(*pm) - self._eval(*mp) + self._eval(*mm)
                    ) / (4 * h**2)
        return f0, grad, hess

    def jet(self, pts, order: int = 2, check: bool = True) -> Jet2:
        x, y, z = as_points(pts)
        if order == 0:
            return Jet2(self._eval(x, y, z))
        f0, g1, h1 = self._fd_pass(x, y, z, order, self.h)
        _, g2, h2 = self._fd_pass(x, y, z, order, self.h / 2)
        grad = (4 * g2 - g1) / 3
        hess = None if order < 2 else (4 * h2 - h1) / 3
        if check:
            scale = 1.0 + np.abs(grad).max()
            err = np.abs(g2 - g1).max() / scale
            if order >= 2:
                hscale = 1.0 + np.abs(hess).max()
                err = max(err, np.abs(h2 - h1).max() / hscale)
            if err > self.tol:
                raise DerivativeDisagreement(
                    f"finite-difference steps h={self.h} and h/2 disagree: "
                    f"relative spread {err:.3e} > tol {self.tol:.3e}"
                )
        return Jet2(f0, grad, hess)


# ---------------------------------------------------------------------------
# vector fields and forms


class _ComponentTriple:
    """Three scalar components; exposes stacked jets."""

    def __init__(self, components):
        comps = []
        for c in components:
            if isinstance(c, ScalarField):
                comps.append(c)
            elif callable(c) and not isinstance(c, (sp.Expr, str)):
                comps.append(CallableScalarField(c))
            else:
                comps.append(ExprScalarField(c))
        self.components: tuple[ScalarField, ...] = tuple(comps)

    @property
    def exprs(self):
        """Component sympy expressions, or None if any component is numeric."""
        if all(isinstance(c, ExprScalarField) for c in self.components):
            return sp.Matrix([c.expr for c in self.components])
        return None

    def values(self, pts) -> np.ndarray:
        p = as_points(pts)
        return np.stack([c(p) for c in self.components])

    def jets(self, pts, order: int = 2) -> list[Jet2]:
        p = as_points(pts)
        return [c.jet(p, order) for c in self.components]

    def jacobian(self, pts) -> np.ndarray:
        """J[i, k] = d_i (component_k); shape (3, 3, N)."""
        jets = self.jets(pts, order=1)
        return np.stack([j.grad for j in jets], axis=1)


class VectorField(_ComponentTriple):
    """Contravariant components v^i in chart coordinates."""


class OneForm(_ComponentTriple):
    """Covariant components omega_i in chart coordinates."""


class TwoFormValue:
    """Antisymmetric coefficients F_ij at a batch of points, shape (3, 3, N)."""

    def __init__(self, coeff: np.ndarray):
        self.coeff = np.asarray(coeff, dtype=float)

    def __call__(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.einsum("ij...,i...,j...->...", self.coeff, u, v)


# ---------------------------------------------------------------------------
# operations


def evaluate_jet(field: ScalarField, point, order: int = 1, domain: ChartDomain | None = None) -> Jet2:
    """Value and requested partials of a scalar field at a point (or batch)."""
    if order not in (0, 1, 2):
        raise FieldError("order must be 0, 1 or 2")
    pts = as_points(point)
    if domain is not None:
        pts = domain.require_inside(pts)
    return field.jet(pts, order=order)


def lie_bracket(u: VectorField, v: VectorField, point) -> np.ndarray:
    """[u, v]^i = u^j d_j v^i - v^j d_j u^i, evaluated numerically."""
    pts = as_points(point)
    uj = u.jets(pts, order=1)
    vj = v.jets(pts, order=1)
    uval = np.stack([j.val for j in uj])
    vval = np.stack([j.val for j in vj])
    out = np.empty_like(uval)
    for i in range(3):
        out[i] = np.einsum("j...,j...->...", uval, vj[i].grad) - np.einsum(
            "j...,j...->...", vval, uj[i].grad
        )
    return out


def lie_bracket_exprs(u: sp.Matrix, v: sp.Matrix) -> sp.Matrix:
    """Symbolic Lie bracket of component matrices in chart coordinates."""
    return sp.Matrix(
        [
            sum(u[j] * sp.diff(v[i], COORDS[j]) - v[j] * sp.diff(u[i], COORDS[j]) for j in range(3))
            for i in range(3)
        ]
    )


def exterior_derivative(omega: OneForm, point) -> TwoFormValue:
    """(d omega)_ij = d_i omega_j - d_j omega_i at a batch of points."""
    pts = as_points(point)
    jets = omega.jets(pts, order=1)
    n = jets[0].val.shape
    coeff = np.zeros((3, 3) + n)
    for i in range(3):
        for j in range(3):
            coeff[i, j] = jets[j].grad[i] - jets[i].grad[j]
    return TwoFormValue(coeff)


def exterior_derivative_exprs(omega: sp.Matrix) -> sp.Matrix:
    return sp.Matrix(
        3, 3, lambda i, j: sp.diff(omega[j], COORDS[i]) - sp.diff(omega[i], COORDS[j])
    )


def two_form_divergence(components: Sequence[ScalarField], point) -> np.ndarray:
    """d of a two-form given by (F_yz, F_zx, F_xy); zero iff the form is closed."""
    pts = as_points(point)
    triple = _ComponentTriple(list(components))
    jets = triple.jets(pts, order=1)
    return jets[0].grad[0] + jets[1].grad[1] + jets[2].grad[2]


def integrate_density(rho, dom: ChartDomain, refine: int = 1) -> float:
    """Midpoint-rule integral of a scalar density over the margin-reduced box."""
    pts, w = dom.cell_centers(refine=refine)
    vals = rho(pts) if not isinstance(rho, np.ndarray) else rho
    vals = np.asarray(vals, dtype=float)
    if not np.isfinite(vals).all():
        raise FieldError("non-finite density samples in integrate_density")
    return float(vals.sum() * w)


def export_grid_csv(path, dom: ChartDomain, names: Sequence[str], columns: Sequence[np.ndarray]):
    """Write grid samples as CSV with header row x,y,z,<names...>."""
    pts = dom.sample_points()
    cols = [pts[0], pts[1], pts[2]] + [np.asarray(c, dtype=float).ravel() for c in columns]
    header = ["x", "y", "z"] + list(names)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
