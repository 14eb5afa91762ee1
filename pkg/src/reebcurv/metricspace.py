"""L2 geometry of the space of metrics on a chart.

Inner products, straight-line distance upper bounds, volume-based distance
bounds and the three-condition convergence certificate for sequences of
metrics with a semi-metric limit.  All distance statements are upper bounds
d-bar >= d via linear paths; the exact geodesic distance of the L2 metric is
never computed.

All integrals parallelize over grid cells; reports are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import ChartDomain, FieldError, as_points

__all__ = [
    "SemiMetricField",
    "ConvergenceReport",
    "l2_inner",
    "volume",
    "path_length_upper",
    "clarke_bound",
    "clarke_calibration",
    "convergence_report",
]

DEFLATION_DELTA = 1e-8  # relative determinant threshold for deflated sets
EQUALITY_TOL = 1e-10  # componentwise relative equality tolerance
SUM_FLOOR = 1e-12  # distances below this count as zero


def _tensor_values(obj, pts) -> np.ndarray:
    if isinstance(obj, np.ndarray):
        if obj.shape[:2] != (3, 3):
            raise FieldError("tensor arrays must have shape (3, 3, N)")
        return obj
    return obj.evaluate(pts)


class SemiMetricField:
    """A measurable symmetric bilinear field allowed to degenerate on a subset.

    ``degenerate_fn(pts)`` marks the deflated set X = {x : g(x) degenerate};
    ``singular_distance_fn`` (optional) gives the distance to the declared
    singular locus so grids can build a one-cell-layer descriptor around it.
    """

    def __init__(self, evaluate_fn, degenerate_fn, domain: ChartDomain, singular_distance_fn=None, label="semi-metric"):
        self._evaluate = evaluate_fn
        self._degenerate = degenerate_fn
        self.domain = domain
        self._singular_distance = singular_distance_fn
        self.label = label

    def evaluate(self, pts) -> np.ndarray:
        return self._evaluate(as_points(pts))

    def degenerate_mask(self, pts) -> np.ndarray:
        return np.asarray(self._degenerate(as_points(pts)), dtype=bool)

    def singular_distance(self, pts) -> np.ndarray | None:
        if self._singular_distance is None:
            return None
        return self._singular_distance(as_points(pts))


def l2_inner(g, h, k, dom: ChartDomain) -> float:
    """(h, k) = integral of trace(g^-1 h g^-1 k) over dVol(g).

    Symmetric bilinear in (h, k); (g, g) = 3 Vol(g).
    """
    pts, w = dom.cell_centers()
    gv = np.moveaxis(_tensor_values(g, pts), -1, 0)
    hv = np.moveaxis(_tensor_values(h, pts), -1, 0)
    kv = np.moveaxis(_tensor_values(k, pts), -1, 0)
    det = np.linalg.det(gv)
    if det.min() <= 0:
        raise FieldError("base metric degenerate at a sample point in l2_inner")
    ginv = np.linalg.inv(gv)
    tr = np.einsum("nab,nbc,ncd,nda->n", ginv, hv, ginv, kv)
    return float((tr * np.sqrt(det)).sum() * w)


def volume(obj, dom: ChartDomain | None = None, quadrature_tol: float = 1e-6) -> float:
    """Total metric volume; for contact data the determinant route is checked
    against the (1/theta') alpha ^ d(alpha) density route."""
    wedge_route = None
    if hasattr(obj, "metric") and hasattr(obj, "chart"):  # ContactData
        dom = dom or obj.domain
        pts, w = dom.cell_centers()
        density = obj.metric().volume_density(pts)
        wedge_route = float((obj.chart.wedge_coefficient(pts) / obj.theta).sum() * w)
    else:
        if dom is None:
            dom = obj.domain
        pts, w = dom.cell_centers()
        density = obj.volume_density(pts)
    if not np.isfinite(density).all():
        raise FieldError("non-finite volume density")
    det_route = float(density.sum() * w)
    if wedge_route is not None and abs(det_route - wedge_route) > quadrature_tol * (1 + abs(det_route)):
        raise FieldError(
            f"volume routes disagree: determinant {det_route} vs wedge {wedge_route}"
        )
    return det_route


def path_length_upper(g0, g1, dom: ChartDomain, steps: int = 16) -> float:
    """Length of the straight segment g_t = (1-t) g0 + t g1 in the L2 metric.

    An upper bound for d(g0, g1); symmetric in its arguments up to quadrature.
    The segment must stay positive definite at the sampled t.
    """
    pts, w = dom.cell_centers()
    a = np.moveaxis(_tensor_values(g0, pts), -1, 0)
    b = np.moveaxis(_tensor_values(g1, pts), -1, 0)
    gdot = b - a
    total = 0.0
    dt = 1.0 / steps
    for k in range(steps):
        t = (k + 0.5) * dt
        gt = (1 - t) * a + t * b
        det = np.linalg.det(gt)
        if det.min() <= 0:
            raise FieldError(f"segment leaves the SPD cone at t={t}")
        ginv = np.linalg.inv(gt)
        tr = np.einsum("nab,nbc,ncd,nda->n", ginv, gdot, ginv, gdot)
        norm_sq = (tr * np.sqrt(det)).sum() * w
        total += np.sqrt(max(norm_sq, 0.0)) * dt
    return float(total)


def _difference_mask(a: np.ndarray, b: np.ndarray, tol: float) -> np.ndarray:
    scale = 1.0 + np.maximum(np.abs(a), np.abs(b)).max(axis=(1, 2))
    return np.abs(a - b).max(axis=(1, 2)) > tol * scale


def clarke_bound(g0, g1, dom: ChartDomain, equality_tol: float = EQUALITY_TOL) -> dict:
    """sqrt(Vol(D, g0)) + sqrt(Vol(D, g1)) over the difference set D.

    D is the grid set where the metrics differ componentwise beyond the
    relative equality tolerance.  The dimensional constant in front of the
    true distance bound is not known; clarke_calibration fits it empirically.
    """
    pts, w = dom.cell_centers()
    a = np.moveaxis(_tensor_values(g0, pts), -1, 0)
    b = np.moveaxis(_tensor_values(g1, pts), -1, 0)
    mask = _difference_mask(a, b, equality_tol)
    vol0 = float((np.sqrt(np.linalg.det(a)) * mask).sum() * w)
    vol1 = float((np.sqrt(np.linalg.det(b)) * mask).sum() * w)
    return {
        "bound": float(np.sqrt(vol0) + np.sqrt(vol1)),
        "difference_volume_g0": vol0,
        "difference_volume_g1": vol1,
        "difference_fraction": float(mask.mean()),
    }


def clarke_calibration(metric_pairs, dom: ChartDomain, steps: int = 8) -> dict:
    """Empirical constant: max observed path_length_upper / clarke bound."""
    ratios = []
    for g0, g1 in metric_pairs:
        bound = clarke_bound(g0, g1, dom)["bound"]
        if bound <= SUM_FLOOR:
            continue
        ratios.append(path_length_upper(g0, g1, dom, steps=steps) / bound)
    return {
        "C_hat": float(max(ratios)) if ratios else 0.0,
        "n_pairs": len(ratios),
        "note": "empirical ratio only; upper bounds satisfy d-bar >= d",
    }


# ---------------------------------------------------------------------------
# convergence certificate


@dataclass
class ConvergenceReport:
    pair_bounds: list
    partial_sums: list
    tail_slope: float
    tail_r_squared: float
    sum_estimate: float
    summable: bool
    deflated_volume_sequence: float
    deflated_volume_limit: float
    symmetric_difference_volume: float
    nullset_threshold: float
    nullset_ok: bool
    max_pointwise_deviation: float
    pointwise_tol: float
    pointwise_ok: bool
    verdict: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "details"}
        out["pair_bounds"] = [float(v) for v in self.pair_bounds]
        out["partial_sums"] = [float(v) for v in self.partial_sums]
        out.update(self.details)
        return out


def _geometric_tail_fit(bounds: np.ndarray) -> tuple[float, float]:
    """Least-squares slope and R^2 of log(d_k) against k (d_k above floor)."""
    keep = bounds > SUM_FLOOR
    if keep.sum() < 2:
        return -np.inf, 1.0
    k = np.arange(len(bounds))[keep]
    logs = np.log(bounds[keep])
    slope, intercept = np.polyfit(k, logs, 1)
    fitted = slope * k + intercept
    ss_res = float(((logs - fitted) ** 2).sum())
    ss_tot = float(((logs - logs.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(r2)


def convergence_report(
    seq,
    g_inf: SemiMetricField | None = None,
    dom: ChartDomain | None = None,
    pointwise_tol: float = 1e-8,
) -> ConvergenceReport:
    """Certificate for L2 convergence of a metric sequence to a semi-metric.

    ``seq`` must expose .metrics (evaluate-ables), .pair_bounds (consecutive
    distance upper bounds) and .domain; realization pipelines return such an
    object.  Conditions checked at grid resolution:

    1. summability of the pair bounds (geometric-tail fit of log d_k);
    2. the deflated set of the sequence and the degenerate set of the limit
       differ by at most one grid cell layer around the declared singular set;
    3. pointwise convergence of the final metric to the limit outside the
       deflated sets.

    Failures are verdicts, not errors.
    """
    metrics = list(seq.metrics)
    if not metrics:
        raise FieldError("empty metric sequence")
    bounds = np.asarray(list(seq.pair_bounds), dtype=float)
    dom = dom or seq.domain
    if g_inf is None:
        g_inf = getattr(seq, "limit", None)
    if g_inf is None:
        raise FieldError("convergence_report needs the limit semi-metric")

    # condition 1: summability
    partial = np.cumsum(bounds) if len(bounds) else np.array([0.0])
    slope, r2 = _geometric_tail_fit(bounds)
    all_floor = bool((bounds <= SUM_FLOOR).all()) if len(bounds) else True
    if all_floor:
        summable, sum_estimate = True, float(partial[-1]) if len(bounds) else 0.0
    elif slope < -1e-2:
        ratio = float(np.exp(slope))
        sum_estimate = float(partial[-1] + bounds[-1] * ratio / (1 - ratio))
        summable = True
    else:
        sum_estimate = float("inf")
        summable = False

    # condition 2: deflated sets differ at most by a nullset (one cell layer)
    pts, w = dom.cell_centers()
    ref = np.moveaxis(metrics[0].evaluate(pts) if not isinstance(metrics[0], np.ndarray) else metrics[0], -1, 0)
    det_ref = np.linalg.det(ref)
    defl_seq = np.zeros(pts.shape[1], dtype=bool)
    for m in metrics:
        mv = np.moveaxis(_tensor_values(m, pts), -1, 0)
        defl_seq |= np.linalg.det(mv) / det_ref < DEFLATION_DELTA
    defl_inf = g_inf.degenerate_mask(pts)
    sd = g_inf.singular_distance(pts)
    layer = np.zeros_like(defl_inf)
    flow_axis = None
    if sd is not None:
        widths = [dom.length(i) / dom.grid[i] for i in range(3)]
        layer = sd <= 0.5 * max(widths)
    ref_density = np.sqrt(det_ref)
    sym = defl_seq ^ defl_inf
    sym_outside_layer = sym & ~layer
    sym_vol = float((ref_density * sym_outside_layer).sum() * w)
    layer_vol = float((ref_density * layer).sum() * w)
    threshold = max(layer_vol, SUM_FLOOR)
    nullset_ok = sym_vol <= threshold

    # condition 3: pointwise convergence outside the deflated set
    last = np.moveaxis(_tensor_values(metrics[-1], pts), -1, 0)
    ginf_vals = np.moveaxis(g_inf.evaluate(pts), -1, 0)
    outside = ~(defl_seq | defl_inf | layer)
    if outside.any():
        dev = np.abs(last - ginf_vals).max(axis=(1, 2))
        max_dev = float(dev[outside].max())
    else:
        max_dev = 0.0
    pointwise_ok = max_dev <= pointwise_tol

    defl_seq_vol = float((ref_density * defl_seq).sum() * w)
    defl_inf_vol = float((ref_density * defl_inf).sum() * w)
    return ConvergenceReport(
        pair_bounds=[float(b) for b in bounds],
        partial_sums=[float(v) for v in partial] if len(bounds) else [],
        tail_slope=slope,
        tail_r_squared=r2,
        sum_estimate=sum_estimate,
        summable=summable,
        deflated_volume_sequence=defl_seq_vol,
        deflated_volume_limit=defl_inf_vol,
        symmetric_difference_volume=sym_vol,
        nullset_threshold=threshold,
        nullset_ok=bool(nullset_ok),
        max_pointwise_deviation=max_dev,
        pointwise_tol=pointwise_tol,
        pointwise_ok=bool(pointwise_ok),
        verdict=bool(summable and nullset_ok and pointwise_ok),
        details={"distance_note": "pair bounds are straight-line upper bounds d-bar >= d"},
    )
