"""Batch front-end: config ingestion, pipeline orchestration, report emission.

    reebcurv --config cfg.json --command verify --out results [--seed N]

Commands: verify | realize-local | realize-global | distance.  Exit status:
0 = all checks within tolerance, 1 = a tolerance check failed (reports are
still written), 2 = invalid input.  The JSON config schema is documented in
the README; unknown keys are rejected.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np
import sympy as sp

from . import metricspace, realize
from .contact import ContactData, ExplicitMetric, MODEL_NAMES, model_manifold
from .curvature import (
    Tolerances,
    covariant_reeb_derivative,
    curvature_grid,
    max_ricci_equivalence,
    sectional_oracle,
    sectional_via_jacobi,
    alpha_jacobi_propagate,
)
from .exprlang import ExpressionError, parse_expression
from .fields import ChartDomain, FieldError
from .realize import AdmissibilityError, FlowBox, RealizationError, SweepError
from .reports import write_csv, write_json, write_summary

__all__ = ["main", "run_command", "ConfigError"]


class ConfigError(ValueError):
    pass


MODEL_KEYS = {"manifold", "n", "theta_prime", "L", "period", "grid", "margin"}
COMMON_KEYS = MODEL_KEYS | {"seed", "tolerances"}
ALLOWED_KEYS = {
    "verify": COMMON_KEYS | {"sweep_c", "n_random_perturbations", "jacobi_time", "jacobi_steps"},
    "realize-local": COMMON_KEYS | {"f", "box", "step"},
    "realize-global": COMMON_KEYS | {"f", "epsilon", "n_max", "step", "verify_grid", "band_grid"},
    "distance": {"metrics", "domain", "seed", "tolerances", "path_steps"},
}
BOX_KEYS = {"base", "extent", "seeds", "slices"}
TOL_KEYS = {"analytic", "integrator", "quadrature"}


def _validate_keys(cfg: dict, command: str) -> None:
    allowed = ALLOWED_KEYS[command]
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")


def _tolerances(cfg: dict) -> Tolerances:
    spec = cfg.get("tolerances", {})
    if not isinstance(spec, dict) or set(spec) - TOL_KEYS:
        raise ConfigError(f"tolerances must be a dict with keys among {sorted(TOL_KEYS)}")
    return Tolerances(**{k: float(v) for k, v in spec.items()})


def _build_model(cfg: dict) -> ContactData:
    name = cfg.get("manifold")
    if name not in MODEL_NAMES:
        raise ConfigError(f"config needs 'manifold' in {MODEL_NAMES}, got {name!r}")
    params = {}
    for key in ("n", "theta_prime", "L", "period", "margin"):
        if key in cfg:
            params[key] = cfg[key]
    if "grid" in cfg:
        grid = cfg["grid"]
        if not (isinstance(grid, (list, tuple)) and len(grid) == 3):
            raise ConfigError("grid must be a list of three integers")
        params["grid"] = tuple(int(g) for g in grid)
    return model_manifold(name, **params)


def _parse_f(cfg: dict) -> sp.Expr:
    if "f" not in cfg:
        raise ConfigError("this command requires an 'f' expression")
    return parse_expression(cfg["f"])


# ---------------------------------------------------------------------------
# commands


def _cmd_verify(cfg: dict, out: str, seed: int, tol: Tolerances) -> dict:
    cd = _build_model(cfg)
    structure = cd.validate()
    report = curvature_grid(cd, tol=tol)
    eq = max_ricci_equivalence(cd, report.points)
    agree_fraction = float(eq["agree"].mean())

    # covariant-derivative closed form vs oracle on a subsample
    sub = report.points[:, :: max(1, report.points.shape[1] // 512)]
    fp = cd.frame_point(sub)
    crd = covariant_reeb_derivative(cd, sub, fp.e)

    # seeded random perturbation consistency checks (Lemma route vs oracle)
    rng = np.random.default_rng(seed)
    n_pert = int(cfg.get("n_random_perturbations", 5))
    pert_grid = cd.domain.with_grid((6, 6, 6)).sample_points()
    worst_pert = 0.0
    for _ in range(n_pert):
        p = _random_perturbation(cd, rng)
        closed = realize.ricci_perturbed_closed_form(cd, p, pert_grid)
        cd_p = realize.perturb_complex_structure(cd, p)
        from .curvature import ricci_reeb_oracle

        oracle = ricci_reeb_oracle(cd_p, pert_grid)
        worst_pert = max(worst_pert, float(np.abs(closed - oracle).max()))

    # Jacobi probes at a few interior points
    T = float(cfg.get("jacobi_time", 0.5))
    steps = int(cfg.get("jacobi_steps", 500))
    probes = cd.domain.sample_points()[:, :: max(1, report.points.shape[1] // 3)][:, :3]
    area_drift = 0.0
    jacobi_resid = 0.0
    sec_mismatch = 0.0
    for k in range(probes.shape[1]):
        pt = probes[:, k : k + 1]
        path = alpha_jacobi_propagate(cd, pt, T=T, steps=steps)
        area_drift = max(area_drift, path.area_drift())
        jacobi_resid = max(jacobi_resid, path.jacobi_identity_residual())
        fpk = cd.frame_point(pt)
        k_jac = sectional_via_jacobi(cd, pt)
        k_or = sectional_oracle(cd.metric(), pt, fpk.e, fpk.X).item()
        sec_mismatch = max(sec_mismatch, abs(k_jac - k_or))

    summary = {
        "command": "verify",
        "model": cd.label,
        "backend": "analytic jets",
        "structure": structure,
        "curvature": report.summary,
        "equivalence_agreement_fraction": agree_fraction,
        "covariant_derivative_residual": crd["residual"],
        "random_perturbations": {"count": n_pert, "seed": seed, "worst_residual": worst_pert},
        "jacobi": {
            "time": T,
            "steps": steps,
            "max_area_drift": area_drift,
            "max_identity_residual": jacobi_resid,
            "max_sectional_mismatch": sec_mismatch,
        },
    }
    if "sweep_c" in cfg:
        summary["sweep"] = realize.sweep_lower_ricci(cd, float(cfg["sweep_c"]), tol=tol)
    passed = bool(
        structure["passed"]
        and report.summary["passed"]
        and agree_fraction == 1.0
        and crd["residual"] <= tol.analytic
        and worst_pert <= tol.analytic
        and area_drift <= tol.analytic
        and jacobi_resid <= tol.integrator
        and sec_mismatch <= tol.integrator
    )
    summary["passed"] = passed

    write_csv(
        os.path.join(out, "curvature_grid.csv"),
        ["x", "y", "z", "P", "Q", "ricci_closed", "ricci_oracle", "G", "H", "resid"],
        [
            report.points[0],
            report.points[1],
            report.points[2],
            report.P,
            report.Q,
            report.ricci_closed,
            report.ricci_oracle,
            report.G,
            report.H,
            report.resid,
        ],
    )
    return summary


def _random_perturbation(cd: ContactData, rng) -> realize.PerturbationField:
    """Seeded smooth (lambda, eta), periodic where the chart is."""
    x, y, z = sp.symbols("x y z")
    syms = (x, y, z)
    lam = sp.Float(rng.uniform(-0.3, 0.3))
    eta_arg = sp.Float(0)
    for axis in range(3):
        c = rng.uniform(-0.4, 0.4)
        d = rng.uniform(-0.2, 0.2)
        if cd.domain.periodic[axis]:
            w = 2 * sp.pi / cd.domain.length(axis)
            lam += sp.Float(c) * sp.sin(w * syms[axis]) + sp.Float(d) * sp.cos(w * syms[axis])
            eta_arg += sp.Float(0.3 * rng.uniform(-1, 1)) * sp.cos(w * syms[axis])
        else:
            lam += sp.Float(c) * syms[axis] + sp.Float(d) * syms[axis] ** 2
            eta_arg += sp.Float(0.3 * rng.uniform(-1, 1)) * syms[axis]
    return realize.PerturbationField.make(lam, sp.exp(eta_arg))


def _cmd_realize_local(cfg: dict, out: str, seed: int, tol: Tolerances) -> dict:
    cd = _build_model(cfg)
    f_expr = _parse_f(cfg)
    box_cfg = cfg.get("box", {})
    if not isinstance(box_cfg, dict) or set(box_cfg) - BOX_KEYS:
        raise ConfigError(f"box must be a dict with keys among {sorted(BOX_KEYS)}")
    box = FlowBox(
        base=float(box_cfg.get("base", 0.1)),
        extent=float(box_cfg.get("extent", 0.5)),
        seeds=tuple(box_cfg.get("seeds", (12, 12))),
        slices=int(box_cfg.get("slices", 16)),
    )
    sol = realize.local_realize(cd, f_expr, box, step=float(cfg.get("step", 1e-3)), tol=tol)
    n_seeds = sol.seeds.shape[1]
    eta_col = sol.eta.reshape(-1)
    mu_col = sol.mu.reshape(-1)
    write_csv(
        os.path.join(out, "realization.csv"),
        ["x", "y", "z", "eta", "mu", "ricci", "residual"],
        [
            sol.grid_points[0],
            sol.grid_points[1],
            sol.grid_points[2],
            eta_col,
            mu_col,
            sol.achieved_ricci,
            sol.residual,
        ],
    )
    summary = {
        "command": "realize-local",
        "model": cd.label,
        "f": str(cfg["f"]),
        "box": {"base": box.base, "extent": box.extent, "seeds": list(box.seeds), "slices": box.slices},
        "solution": sol.summary,
        "passed": sol.summary["passed"],
        "n_seeds": n_seeds,
    }
    return summary


def _cmd_realize_global(cfg: dict, out: str, seed: int, tol: Tolerances) -> dict:
    cd = _build_model(cfg)
    f_expr = _parse_f(cfg)
    if "epsilon" not in cfg or "n_max" not in cfg:
        raise ConfigError("realize-global requires 'epsilon' and 'n_max'")
    kwargs = {}
    for key in ("verify_grid", "band_grid"):
        if key in cfg:
            kwargs[key] = tuple(int(v) for v in cfg[key])
    seq = realize.almost_global_realize(
        cd,
        f_expr,
        epsilon=float(cfg["epsilon"]),
        n_max=int(cfg["n_max"]),
        step=float(cfg.get("step", 1e-3)),
        tol=tol,
        **kwargs,
    )
    report = metricspace.convergence_report(seq)
    write_json(os.path.join(out, "convergence.json"), report.to_dict())
    summary = {
        "command": "realize-global",
        "model": cd.label,
        "f": str(cfg["f"]),
        "sequence": seq.summary,
        "convergence_verdict": report.verdict,
        "passed": bool(seq.summary["passed"] and report.verdict),
    }
    return summary


def _metric_from_def(mdef: dict, dom: ChartDomain | None):
    if not isinstance(mdef, dict):
        raise ConfigError("each metric definition must be an object")
    if "components" in mdef:
        extra = set(mdef) - {"components"}
        if extra:
            raise ConfigError(f"unknown metric definition keys: {sorted(extra)}")
        if dom is None:
            raise ConfigError("explicit component metrics need a top-level 'domain'")
        comps = [[parse_expression(c) for c in row] for row in mdef["components"]]
        return ExplicitMetric(comps, dom), dom
    extra = set(mdef) - {"model", "lambda", "eta"}
    if extra:
        raise ConfigError(f"unknown metric definition keys: {sorted(extra)}")
    if "model" not in mdef:
        raise ConfigError("metric definition needs 'model' or 'components'")
    cd = _build_model(mdef["model"])
    if "lambda" in mdef or "eta" in mdef:
        p = realize.PerturbationField.make(mdef.get("lambda", "0"), mdef.get("eta", "1"))
        cd = realize.perturb_complex_structure(cd, p)
    return cd.metric(), cd.domain


def _cmd_distance(cfg: dict, out: str, seed: int, tol: Tolerances) -> dict:
    defs = cfg.get("metrics")
    if not isinstance(defs, list) or len(defs) < 2:
        raise ConfigError("distance requires a 'metrics' list with at least two entries")
    dom = None
    if "domain" in cfg:
        d = cfg["domain"]
        dom = ChartDomain(
            tuple(tuple(float(b) for b in pair) for pair in d["bounds"]),
            tuple(bool(p) for p in d.get("periodic", (False, False, False))),
            tuple(int(g) for g in d.get("grid", (24, 24, 24))),
            float(d.get("margin", 0.0)),
        )
    metrics = []
    for mdef in defs:
        metric, mdom = _metric_from_def(mdef, dom)
        dom = dom or mdom
        metrics.append(metric)
    steps = int(cfg.get("path_steps", 16))
    n = len(metrics)
    path = np.zeros((n, n))
    clarke = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            path[i, j] = path[j, i] = metricspace.path_length_upper(metrics[i], metrics[j], dom, steps=steps)
            clarke[i, j] = clarke[j, i] = metricspace.clarke_bound(metrics[i], metrics[j], dom)["bound"]
    rows_i, rows_j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    write_csv(
        os.path.join(out, "distances.csv"),
        ["i", "j", "path_length_upper", "clarke_bound"],
        [rows_i.ravel(), rows_j.ravel(), path.ravel(), clarke.ravel()],
    )
    return {
        "command": "distance",
        "n_metrics": n,
        "path_length_upper": path.tolist(),
        "clarke_bound": clarke.tolist(),
        "note": "all values are straight-line upper bounds d-bar >= d",
        "passed": True,
    }


COMMANDS = {
    "verify": _cmd_verify,
    "realize-local": _cmd_realize_local,
    "realize-global": _cmd_realize_global,
    "distance": _cmd_distance,
}


def run_command(command: str, cfg: dict, out: str, seed: int | None = None) -> dict:
    """Validate the config, run the command and write reports into ``out``."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; expected one of {sorted(COMMANDS)}")
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    _validate_keys(cfg, command)
    tol = _tolerances(cfg)
    seed = int(cfg.get("seed", 0)) if seed is None else int(seed)
    os.makedirs(out, exist_ok=True)
    summary = COMMANDS[command](cfg, out, seed, tol)
    summary["seed"] = seed
    summary["tolerance_rungs"] = {
        "analytic": tol.analytic,
        "integrator": tol.integrator,
        "quadrature": tol.quadrature,
    }
    write_summary(out, summary)
    return summary


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="reebcurv",
        description="Compatible-metric curvature verification and Reeb Ricci prescription",
    )
    parser.add_argument("--config", required=True, help="path to the JSON run configuration")
    parser.add_argument("--command", required=True, choices=sorted(COMMANDS))
    parser.add_argument("--out", required=True, help="output directory for reports")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    args = parser.parse_args(argv)

    import json

    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        print(f"error: cannot read config: {err}", file=sys.stderr)
        return 2

    try:
        summary = run_command(args.command, cfg, args.out, seed=args.seed)
    except (ConfigError, ExpressionError, AdmissibilityError, SweepError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (RealizationError, FieldError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    status = 0 if summary.get("passed", False) else 1
    print(f"{args.command}: {'PASS' if status == 0 else 'FAIL'} (reports in {args.out})")
    return status


if __name__ == "__main__":
    sys.exit(main())
