"""Monte Carlo experiments behind the command-line harness.

Every experiment draws its replication ``i`` with seed ``seed + i`` where
``i`` is a global index running over sample sizes (and grid points, for
power curves) in the order they appear in the configuration, so any subset
of replications can be rerun on its own.  Rows are buffered and written in
index order; numeric CSV fields use the shortest round-trip decimal.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .dual import DualObjective
from .estimate import dual_estimate, fix_coordinates, min_dual_estimate, sigma2_simple
from .infer import (
    PlanningImpossible,
    approx_power,
    composite_test,
    confidence_region,
    glr_statistic,
    mixture_component_test,
    mixture_dual,
    mixture_dual_chi2,
    power_plan,
    simple_test,
)
from .model import MixtureModel, extend
from .numerics.ecdf import chi2_reference, ecdf_ks, half_chi2_reference
from .numerics.special import chi2_quantile

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
# a GLR below this is counted as an exact zero (boundary maximum)
ZERO_TOL = 1e-8

SCHEMAS = {
    "ecdf": ["statistic", "ecdf", "limit_cdf"],
    "ecdf_summary": ["n", "replications", "ks", "mass_at_zero", "rejection_rate"],
    "power_curve": ["n", "theta_true", "empirical_power", "approx_power", "divergence", "sigma"],
    "estimate": ["n", "replication", "seed", "theta_hat", "alpha_hat", "objective", "converged"],
    "test": ["n", "replication", "seed", "statistic", "dof", "critical_value", "p_value", "reject",
             "estimate"],
    "test_summary": ["n", "replications", "rejection_rate", "ks"],
    "confreg": ["n", "replication", "seed", "covered", "lower", "upper", "points", "statistic_at_truth"],
    "confreg_summary": ["n", "replications", "coverage"],
    "power_plan": ["divergence", "sigma", "dof", "level", "phi2", "n", "power", "target", "n0",
                   "n_star"],
}


class ExperimentError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# output helpers


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_fmt(x) for x in np.ravel(v))
    return str(v)


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _write_manifest(cfg: ExperimentConfig, out: Path, files: dict) -> Path:
    manifest = {
        "library": "dualphi",
        "library_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "kind": cfg.kind,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "files": files,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def config_from_manifest(path) -> ExperimentConfig:
    data = json.loads(Path(path).read_text())
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ExperimentError(f"unsupported manifest schema {data.get('schema_version')!r}")
    return ExperimentConfig.from_dict(data["config"])


# ---------------------------------------------------------------------------
# experiments


def _dual(cfg, model=None, **kw) -> DualObjective:
    return DualObjective(model or cfg.build_model(), cfg.build_divergence(), **kw)


def _ecdf_outputs(stem, cfg, stats_by_n, reference, crit, out):
    files, summary = {}, []
    for n, stats in stats_by_n:
        s = np.sort(np.asarray(stats, dtype=float))
        m = s.size
        rows = [(v, (i + 1) / m, float(reference(v))) for i, v in enumerate(s)]
        name = f"{stem}_n{n}.csv"
        write_csv(out / name, SCHEMAS["ecdf"], rows)
        files[name] = SCHEMAS["ecdf"]
        summary.append((n, m, ecdf_ks(s, reference), float(np.mean(s <= ZERO_TOL)),
                        float(np.mean(s > crit))))
    name = f"{stem}_summary.csv"
    write_csv(out / name, SCHEMAS["ecdf_summary"], summary)
    files[name] = SCHEMAS["ecdf_summary"]
    return files, summary


def _mixture_null(cfg):
    model = cfg.build_model()
    if not isinstance(model, MixtureModel):
        raise ExperimentError("mixture experiments need a mixture model")
    theta = np.zeros(model.dim) if cfg.theta_true is None else model.param(cfg.theta_true)
    return model, theta


def run_glr_ecdf(cfg: ExperimentConfig, out: Path):
    """Null distribution of the mixture GLR against ``0.5 delta_0 + 0.5 chi2_1``."""
    model, theta = _mixture_null(cfg)
    if model.signed:
        raise ExperimentError("the GLR uses the probability mixture, not its signed extension")
    reps = int(cfg.replications)
    result = []
    for j, n in enumerate(cfg.sample_sizes):
        log.info("glr-ecdf n=%d", n)
        stats = []
        for i in range(reps):
            x = model.sample(theta, int(n), cfg.seed + j * reps + i)
            w = glr_statistic(model, x, theta0=theta)
            # a boundary maximum leaves rounding-level residue; the limit law has an atom at 0
            stats.append(0.0 if w <= ZERO_TOL else w)
        result.append((int(n), stats))
    # the 1 - level quantile of the half mixture is the 1 - 2 level chi2_1 quantile
    crit = chi2_quantile(1, 1.0 - 2.0 * cfg.level)
    return _ecdf_outputs("glr_ecdf", cfg, result, half_chi2_reference(), crit, out)


def run_dualchi2_ecdf(cfg: ExperimentConfig, out: Path):
    """Null distribution of ``2n chi2_tilde(theta0, .)`` on the signed mixture."""
    model, theta = _mixture_null(cfg)
    dual = mixture_dual(model if model.signed else extend(model), cfg.theta_e)
    reps = int(cfg.replications)
    result = []
    for j, n in enumerate(cfg.sample_sizes):
        log.info("dualchi2-ecdf n=%d", n)
        stats = []
        for i in range(reps):
            x = dual.model.sample(theta, int(n), cfg.seed + j * reps + i)
            stats.append(mixture_dual_chi2(dual, theta, x).statistic)
        result.append((int(n), stats))
    crit = chi2_quantile(1, 1.0 - cfg.level)
    return _ecdf_outputs("dualchi2_ecdf", cfg, result, chi2_reference(1), crit, out)


def power_curve_rows(cfg: ExperimentConfig, sample_sizes=None, grid=None):
    """``(n, theta_T, empirical, approx, D, sigma)`` rows of the power experiment."""
    dual = _dual(cfg)
    model = dual.model
    t0 = model.param(cfg.theta0)
    sizes = [int(n) for n in (cfg.sample_sizes if sample_sizes is None else sample_sizes)]
    grid = [float(g) for g in (cfg.grid if grid is None else grid)]
    reps = int(cfg.replications)
    # population quantities do not depend on n
    pop = {}
    for g in grid:
        tt = model.param(g)
        D = dual.divergence(t0, tt)
        sigma = math.sqrt(sigma2_simple(dual, t0, theta_true=tt))
        pop[g] = (D, sigma)
    rows = []
    for j, n in enumerate(cfg.sample_sizes):
        if n not in sizes:
            continue
        for k, g in enumerate(cfg.grid):
            if float(g) not in grid:
                continue
            tt = model.param(g)
            base = cfg.seed + (j * len(cfg.grid) + k) * reps
            rejected = 0
            for i in range(reps):
                x = model.sample(tt, n, base + i)
                rejected += bool(simple_test(dual, t0, x, level=cfg.level).reject)
            D, sigma = pop[float(g)]
            approx = (float(approx_power(D, sigma, n, model.dim, cfg.level, dual.phi2))
                      if sigma > 0 else math.nan)
            rows.append((n, float(g), rejected / reps, approx, D, sigma))
        log.info("power-curve n=%d done", n)
    return rows


def run_power_curve(cfg: ExperimentConfig, out: Path):
    rows = power_curve_rows(cfg)
    write_csv(out / "power_curve.csv", SCHEMAS["power_curve"], rows)
    return {"power_curve.csv": SCHEMAS["power_curve"]}, rows


def run_estimate(cfg: ExperimentConfig, out: Path):
    """``theta_hat`` (min-dual) and, given ``theta0``, ``alpha_hat(theta0)``."""
    dual = _dual(cfg)
    model = dual.model
    tt = model.param(cfg.theta_true)
    reps = int(cfg.replications)
    rows = []
    for j, n in enumerate(cfg.sample_sizes):
        for i in range(reps):
            seed = cfg.seed + j * reps + i
            x = model.sample(tt, int(n), seed)
            est = min_dual_estimate(dual, x)
            alpha = est.companion
            if cfg.theta0 is not None:
                alpha = dual_estimate(dual, cfg.theta0, x, covariance=False).estimate
            rows.append((int(n), i, seed, est.estimate, alpha, est.objective_value, est.converged))
    write_csv(out / "estimate.csv", SCHEMAS["estimate"], rows)
    return {"estimate.csv": SCHEMAS["estimate"]}, rows


def _test_outputs(stem, cfg, rows, dof, out):
    write_csv(out / f"{stem}.csv", SCHEMAS["test"], rows)
    ref = chi2_reference(dof)
    summary = []
    for n in cfg.sample_sizes:
        st = [r[3] for r in rows if r[0] == int(n)]
        rej = [r[7] for r in rows if r[0] == int(n)]
        finite = [s for s in st if math.isfinite(s)]
        ks = ecdf_ks(finite, ref) if finite and dof > 0 else math.nan
        summary.append((int(n), len(st), float(np.mean([bool(v) for v in rej])), ks))
    write_csv(out / f"{stem}_summary.csv", SCHEMAS["test_summary"], summary)
    return ({f"{stem}.csv": SCHEMAS["test"], f"{stem}_summary.csv": SCHEMAS["test_summary"]},
            summary)


def _test_row(n, i, seed, rep, est):
    return (n, i, seed, rep.statistic, rep.dof, rep.critical_value, rep.p_value, rep.reject, est)


def run_test_simple(cfg: ExperimentConfig, out: Path):
    dual = _dual(cfg)
    model = dual.model
    tt = model.param(cfg.theta_true)
    t0 = model.param(cfg.theta0 if cfg.theta0 is not None else cfg.theta_true)
    reps = int(cfg.replications)
    rows = []
    for j, n in enumerate(cfg.sample_sizes):
        for i in range(reps):
            seed = cfg.seed + j * reps + i
            x = model.sample(tt, int(n), seed)
            rep = simple_test(dual, t0, x, level=cfg.level)
            rows.append(_test_row(int(n), i, seed, rep, None if rep.estimate is None
                                  else rep.estimate.estimate))
    return _test_outputs("test_simple", cfg, rows, model.dim, out)


def run_test_composite(cfg: ExperimentConfig, out: Path):
    dual = _dual(cfg)
    model = dual.model
    if not cfg.constraint or "fixed" not in cfg.constraint:
        raise ExperimentError("test-composite needs constraint = { fixed = { <index> = <value> } }")
    cons = fix_coordinates(model, {int(k): float(v) for k, v in cfg.constraint["fixed"].items()})
    tt = model.param(cfg.theta_true)
    reps = int(cfg.replications)
    rows = []
    for j, n in enumerate(cfg.sample_sizes):
        for i in range(reps):
            seed = cfg.seed + j * reps + i
            x = model.sample(tt, int(n), seed)
            rep = composite_test(dual, cons, x, level=cfg.level)
            rows.append(_test_row(int(n), i, seed, rep, None if rep.estimate is None
                                  else rep.estimate.estimate))
    return _test_outputs("test_composite", cfg, rows, cons.l, out)


def run_mixture_test(cfg: ExperimentConfig, out: Path):
    model, theta = _mixture_null(cfg)
    dual = mixture_dual(model if model.signed else extend(model), cfg.theta_e)
    k0 = int((cfg.constraint or {}).get("components", model.k - 1))
    reps = int(cfg.replications)
    rows = []
    for j, n in enumerate(cfg.sample_sizes):
        for i in range(reps):
            seed = cfg.seed + j * reps + i
            x = dual.model.sample(theta, int(n), seed)
            rep = mixture_component_test(dual, k0, x, level=cfg.level)
            est = rep.estimate
            alpha = None if est is None else (est.estimate if est.companion is None
                                              else est.companion)
            rows.append(_test_row(int(n), i, seed, rep, alpha))
    return _test_outputs("mixture_test", cfg, rows, model.k - k0, out)


def run_confreg(cfg: ExperimentConfig, out: Path):
    """Boundary-safe regions; ``covered`` records whether ``theta_T`` is inside."""
    model, theta = _mixture_null(cfg)
    dual = mixture_dual(model if model.signed else extend(model), cfg.theta_e)
    grid = None if cfg.grid is None else np.asarray(cfg.grid, dtype=float)
    reps = int(cfg.replications)
    rows, summary = [], []
    for j, n in enumerate(cfg.sample_sizes):
        covered = []
        for i in range(reps):
            seed = cfg.seed + j * reps + i
            x = dual.model.sample(theta, int(n), seed)
            reg = confidence_region(dual, x, level=cfg.level, grid=grid)
            hit = np.flatnonzero(np.all(np.isclose(reg.grid.reshape(len(reg.statistics), -1),
                                                   theta, rtol=0, atol=1e-12), axis=1))
            if hit.size:
                s_true = float(reg.statistics[hit[0]])
            else:
                s_true = mixture_dual_chi2(dual, theta, x).statistic
            cov = s_true <= reg.critical_value
            covered.append(cov)
            lo, hi = (None, None) if reg.hull is None else reg.hull
            rows.append((int(n), i, seed, cov, lo, hi, len(reg.points), s_true))
        summary.append((int(n), reps, float(np.mean(covered))))
    write_csv(out / "confreg.csv", SCHEMAS["confreg"], rows)
    write_csv(out / "confreg_summary.csv", SCHEMAS["confreg_summary"], summary)
    return ({"confreg.csv": SCHEMAS["confreg"], "confreg_summary.csv": SCHEMAS["confreg_summary"]},
            summary)


def run_power_plan(cfg: ExperimentConfig, out: Path):
    dual = _dual(cfg)
    model = dual.model
    t0, tt = model.param(cfg.theta0), model.param(cfg.theta_true)
    D = dual.divergence(t0, tt)
    sigma = math.sqrt(sigma2_simple(dual, t0, theta_true=tt))
    kw = {"n": cfg.n} if cfg.n is not None else {"target": cfg.target_power or 0.9}
    try:
        plan = power_plan(D, sigma, dof=model.dim, level=cfg.level, phi2=dual.phi2, **kw)
    except PlanningImpossible as exc:
        raise ExperimentError(str(exc)) from exc
    row = (plan.divergence, plan.sigma, plan.dof, plan.level, plan.phi2, plan.n, plan.power,
           plan.target, plan.n0, plan.n_star)
    write_csv(out / "power_plan.csv", SCHEMAS["power_plan"], [row])
    return {"power_plan.csv": SCHEMAS["power_plan"]}, [row]


RUNNERS = {
    "estimate": run_estimate,
    "test-simple": run_test_simple,
    "test-composite": run_test_composite,
    "power-curve": run_power_curve,
    "power-plan": run_power_plan,
    "glr-ecdf": run_glr_ecdf,
    "dualchi2-ecdf": run_dualchi2_ecdf,
    "confreg": run_confreg,
    "mixture-test": run_mixture_test,
}

_PLOTTED = ("glr-ecdf", "dualchi2-ecdf", "power-curve")


def run(cfg: ExperimentConfig):
    """Run one experiment; returns ``(output directory, summary rows)``."""
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    files, summary = RUNNERS[cfg.kind](cfg, out)
    _write_manifest(cfg, out, files)
    if cfg.kind in _PLOTTED:
        emit_plot_script(out)
    return out, summary


# ---------------------------------------------------------------------------
# plotting


_PLOT_TEMPLATE = '''"""Render the figures of a dualphi run.  Usage: python3 plot.py [output dir]"""
import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))
KIND = {kind!r}
FILES = {files!r}


def rows(name):
    with open(os.path.join(HERE, name), newline="") as fh:
        return list(csv.DictReader(fh))


if KIND in ("glr-ecdf", "dualchi2-ecdf"):
    for name in FILES:
        r = rows(name)
        x = [float(v["statistic"]) for v in r]
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.step(x, [float(v["ecdf"]) for v in r], where="post", label="empirical")
        ax.plot(x, [float(v["limit_cdf"]) for v in r], "--", label="limit law")
        ax.set_xlabel("statistic")
        ax.set_ylabel("distribution function")
        ax.set_title(name[:-4])
        ax.legend()
        fig.savefig(os.path.join(HERE, name[:-4] + ".png"), dpi=120, bbox_inches="tight")
        plt.close(fig)
else:
    r = rows(FILES[0])
    fig, ax = plt.subplots(figsize=(6, 4))
    for n in sorted({{int(v["n"]) for v in r}}):
        sub = [v for v in r if int(v["n"]) == n]
        t = [float(v["theta_true"]) for v in sub]
        line, = ax.plot(t, [float(v["empirical_power"]) for v in sub], "-", label=f"n={{n}}")
        ax.plot(t, [float(v["approx_power"]) for v in sub], "--", color=line.get_color())
    ax.set_xlabel("true parameter")
    ax.set_ylabel("power")
    ax.legend()
    fig.savefig(os.path.join(HERE, "power_curve.png"), dpi=120, bbox_inches="tight")
    plt.close(fig)
'''


def emit_plot_script(out_dir) -> Path:
    """Write ``plot.py`` (matplotlib) rendering the ECDF overlays or power curves.

    Raises
    ------
    FileNotFoundError
        Listing every missing input when the run outputs are incomplete.
    """
    out = Path(out_dir)
    manifest = out / "manifest.json"
    if not manifest.exists():
        raise FileNotFoundError(f"missing files in {out}: manifest.json")
    data = json.loads(manifest.read_text())
    kind = data["kind"]
    if kind not in _PLOTTED:
        raise ExperimentError(f"nothing to plot for experiment kind {kind!r}")
    names = sorted(data["files"])
    if kind == "power-curve":
        names = ["power_curve.csv"]
    else:
        names = [n for n in names if not n.endswith("_summary.csv")]
    missing = [n for n in names if not (out / n).exists()]
    if missing:
        raise FileNotFoundError(f"missing files in {out}: {', '.join(missing)}")
    path = out / "plot.py"
    path.write_text(_PLOT_TEMPLATE.format(kind=kind, files=names))
    os.chmod(path, 0o644)
    return path
