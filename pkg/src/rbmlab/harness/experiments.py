"""Experiment runners behind the CLI.  Every runner takes an ExperimentConfig,
writes its result files into the output directory and returns a summary."""
from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np

from .. import __version__, dbm, meanfield, selfconsistent, stats
from .. import emf as emf_pkg
from ..emf.generator import rk4_solve
from ..emf.numeric import random_instance, random_orthogonal
from ..emf.observables import evaluate_g
from ..ensemble import EntryLaw, build_profile, match_four_moments, regularize, sample_band
from ..io import read_rbm1, save_sample, write_csv, write_json
from ..seeding import seed_derive, stream
from ..spectral import RegularityParams, eigh
from .config import ExperimentConfig
from .pool import pool_map


class Run:
    """Output directory bookkeeping: every file written is listed in the manifest."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.dir = Path(config.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.start = time.perf_counter()

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.dir / name

    def csv(self, name, header, rows):
        write_csv(self.path(name), header, rows)

    def json(self, name, payload):
        write_json(self.path(name), payload)

    def finish(self, summary: dict) -> dict:
        self.json("summary.json", summary)
        self.config.save(self.dir / "config.json")
        write_json(self.dir / "manifest.json", {
            "tool": "rbmlab", "version": __version__, "command": self.config.command,
            "config": self.config.to_dict(), "files": sorted(self.files + ["config.json"]),
            "wall_time_s": round(time.perf_counter() - self.start, 3)})
        return summary


def _law(cfg: ExperimentConfig) -> EntryLaw:
    ens = cfg.ensemble
    law = EntryLaw.from_name(ens.law)
    if cfg.options.get("matched"):
        law = match_four_moments(law, ens.eps_m, ens.c, ens.w, ens.n)
    return law


def _sample(cfg: ExperimentConfig, label):
    ens = cfg.ensemble
    prof = build_profile(ens.n, ens.w, ens.shape)
    s = sample_band(prof, _law(cfg), ens.symmetry, seed_derive(cfg.seed, label))
    if ens.A is not None:
        s = regularize(s, ens.A, seed_derive(cfg.seed, list(label) + ["regularize"]))
    return s


# -- ensemble and spectrum ---------------------------------------------------------


def cmd_sample(cfg: ExperimentConfig) -> dict:
    run = Run(cfg)
    recs = []
    for i in range(cfg.stats.samples):
        s = _sample(cfg, ["sample", i])
        name = f"sample_{i:03d}.rbm1"
        save_sample(run.path(name), s)
        run.files.append(name + ".json")
        recs.append({"file": name, "seed": s.seed})
    return run.finish({"samples": recs, "law": _law(cfg).describe()})


def cmd_spectrum(cfg: ExperimentConfig) -> dict:
    run = Run(cfg)
    src = cfg.options.get("input")
    if src:
        m, w, _ = read_rbm1(src)
    else:
        m = _sample(cfg, ["sample", 0]).entries
    sd = eigh(m, backend=cfg.options.get("backend", "lapack"))
    run.csv("eigenvalues.csv", ["k", "lambda"], [(k, float(x)) for k, x in enumerate(sd.eigenvalues)])
    return run.finish({"n": sd.n, "residual": sd.residual, "orth_defect": sd.orth_defect, "backend": sd.backend})


def cmd_dbm_couple(cfg: ExperimentConfig) -> dict:
    run = Run(cfg)
    n = cfg.ensemble.n if cfg.ensemble.n <= 12 else 5
    v = np.diag(2.0 * (np.arange(n) - (n - 1) / 2))
    audit = dbm.coupling_audit(v, cfg.flow.t, cfg.flow.dt, cfg.flow.paths, seed_derive(cfg.seed, ["audit"]),
                               cfg.emf.cls)
    dts = cfg.options.get("dts") or [4 * cfg.flow.dt, 2 * cfg.flow.dt, cfg.flow.dt]
    trend = dbm.weak_order_trend(v, cfg.flow.t, dts, cfg.flow.paths, seed_derive(cfg.seed, ["trend"]))
    run.csv("weak_order.csv", ["dt", "mean", "stderr", "bias", "order_breaks"],
            [(r["dt"], r["mean"], r["stderr"], r["bias"], r["order_breaks"]) for r in trend["levels"]])
    run.json("coupling_audit.json", audit)
    return run.finish({"ratios": trend["ratios"], "exact": trend["exact"]})


# -- moment flow -----------------------------------------------------------------


def cmd_emf_verify(cfg: ExperimentConfig) -> dict:
    run = Run(cfg)
    classes = ["symmetric", "hermitian"] if cfg.emf.cls == "both" else [cfg.emf.cls]
    route = cfg.options.get("route", "symbolic")
    out = {}
    for cls in classes:
        if route == "symbolic":
            recs = [r.as_record() for r in emf_pkg.verify_all(cfg.emf.sites, cfg.emf.d, cls)]
        else:
            if cls != "symmetric":
                raise ValueError("the numeric route covers the symmetric class only")
            gen = stream(seed_derive(cfg.seed, ["numeric"]), "instances")
            recs = []
            for i in range(cfg.options.get("instances", 200)):
                u, spec, eta, k, l = random_instance(gen, max_n=8, max_d=cfg.emf.d)
                rep = emf_pkg.verify_identity_numeric(u, spec, eta, k, l)
                recs.append({"eta": eta.label(), "k": k, "l": l, "class": cls, "route": "numeric",
                             "lhs": rep.lhs, "rhs": rep.rhs, "max_err": rep.max_rel_err, "pass": rep.passed})
        run.json(f"emf_verify_{cls}.json", recs)
        out[cls] = {"cases": len(recs), "passed": sum(r["pass"] for r in recs)}
    return run.finish(out)


def cmd_emf_simulate(cfg: ExperimentConfig) -> dict:
    run = Run(cfg)
    n, d, t = cfg.emf.sites, cfg.emf.d, cfg.flow.t
    lam = np.arange(n, dtype=float) - (n - 1) / 2
    u0 = random_orthogonal(n, stream(seed_derive(cfg.seed, ["u0"]), "u0"))
    spec = emf_pkg.OverlapSet(index_set=list(range(n // 2)))
    space = emf_pkg.ConfigSpace(n, d)
    p0 = emf_pkg.overlaps(u0, spec)
    f0 = np.array([evaluate_g(p0, e, cfg.emf.cls) for e in space.configs])
    speed = emf_pkg.flow_speed(cfg.emf.cls)
    ode, _ = rk4_solve(speed * emf_pkg.generator_matrix(space, lam, cfg.emf.cls, cfg.emf.cutoff), f0, t)
    mc = emf_pkg.monte_carlo_f(lam, u0, spec, space.configs, t, cfg.flow.paths, cfg.flow.dt,
                               seed=seed_derive(cfg.seed, ["mc"]), cls=cfg.emf.cls)
    rows = []
    for i, e in enumerate(space.configs):
        mean, se = mc[e]
        rows.append((e.label(), float(mean), float(se), float(ode[i]), float((mean - ode[i]) / se)))
    run.csv("emf_simulate.csv", ["eta", "mc_mean", "mc_stderr", "ode", "z"], rows)
    return run.finish({"max_abs_z": max(abs(r[4]) for r in rows), "speed": speed, "configs": len(rows)})


# -- mean-field ------------------------------------------------------------------


def cmd_mfr_trace(cfg: ExperimentConfig) -> dict:
    run = Run(cfg)
    s = _sample(cfg, ["sample", 0])
    o = cfg.options
    curve = meanfield.trace_curves(s, o.get("e_lo", -0.3), o.get("e_hi", 0.3), o.get("step", 0.002))
    run.csv("curves.csv", ["e", "k", "C_k", "k_prime"], list(curve.rows()))
    lam = np.linalg.eigvalsh(s.entries)
    hits = [(k, e, float(lam[k]), abs(e - lam[k])) for k, e in sorted(curve.diagonal_hits.items())]
    run.csv("diagonal_hits.csv", ["k", "e_hit", "lambda_k", "abs_err"], hits)
    return run.finish({"hits": len(hits), "max_err": max((h[3] for h in hits), default=math.nan),
                       "refinements": curve.refinements})


def cmd_mfr_slope(cfg: ExperimentConfig) -> dict:
    run = Run(cfg)
    s = _sample(cfg, ["sample", 0])
    lam = np.linalg.eigvalsh(s.entries)
    o = cfg.options
    ks = o.get("labels") or [int(k) for k in np.searchsorted(lam, np.linspace(-1, 1, 5))]
    rows = []
    for k in ks:
        r = meanfield.slope_check(s, k, float(lam[k]) + o.get("offset", 1e-3), o.get("fd_step", 1e-5))
        rows.append((k, r.fd_slope, r.formula_slope, r.rel_err))
    run.csv("slope.csv", ["k", "fd_slope", "formula_slope", "rel_err"], rows)
    return run.finish({"max_rel_err": max(r[3] for r in rows)})


def cmd_mfr_project(cfg: ExperimentConfig) -> dict:
    run = Run(cfg)
    o = cfg.options
    n = cfg.ensemble.n
    window = o.get("window") or n ** (-0.6)

    def one(i):
        s = _sample(cfg, ["sample", i])
        return [(i, r["j"], r["lambda"], r["C"], r["r"]) for r in meanfield.projection_check(s, o.get("e0", 0.0), window)]

    rows = [r for chunk in pool_map(one, range(cfg.stats.samples)) for r in chunk]
    run.csv("projection.csv", ["sample", "j", "lambda_j", "C_j", "r_j"], rows)
    rs = np.array([r[4] for r in rows])
    return run.finish({"hits": len(rows), "fraction_within_0.1": float(np.mean(np.abs(rs - 1) <= 0.1)) if rows else math.nan,
                       "median_r": float(np.median(rs)) if rows else math.nan})


# -- self-consistent equation ----------------------------------------------------


def cmd_sc_solve(cfg: ExperimentConfig) -> dict:
    run = Run(cfg)
    o = cfg.options
    prof = build_profile(cfg.ensemble.n, cfg.ensemble.w, cfg.ensemble.shape)
    q = selfconsistent.MQuery(prof, complex(o.get("z_re", 0.0), o.get("z_im", 0.05)), o.get("e", 0.0),
                              zeta=o.get("zeta", 0.0))
    selfconsistent.solve_M(q)
    run.csv("M.csv", ["i", "re", "im"], [(i, float(m.real), float(m.imag)) for i, m in enumerate(q.M)])
    summary = q.record()
    if cfg.ensemble.w % 2 == 0:
        summary["half_sum_defect"] = selfconsistent.half_sum_defect(q)
    if cfg.stats.samples:
        reps = [selfconsistent.compare_empirical(_sample(cfg, ["sample", i]), q, cfg.stats.tau)
                for i in range(cfg.stats.samples)]
        run.csv("compare.csv", ["sample", "max_dev", "diag_dev", "bound", "ratio"],
                [(i, r["max_dev"], r["diag_dev"], r["bound"], r["ratio"]) for i, r in enumerate(reps)])
        summary["fraction_within_bound"] = float(np.mean([r["ratio"] <= 1 for r in reps]))
    return run.finish(summary)


def cmd_sc_audit(cfg: ExperimentConfig) -> dict:
    run = Run(cfg)
    o = cfg.options
    n = cfg.ensemble.n
    params = RegularityParams(o.get("eta_star", n ** -0.5), o.get("eta_upper", n ** -0.1), o.get("r", 0.05), 0.0,
                              o.get("e0", 0.0))
    s = _sample(cfg, ["sample", 0])
    e_values = o.get("e_values") or [0.0]
    rows, summary = selfconsistent.regularity_audit(s, params, e_values, tau=cfg.stats.tau)
    run.csv("audit.csv", ["E", "eta", "check_name", "value", "bound", "pass"], rows)
    return run.finish(summary)


# -- statistics ------------------------------------------------------------------


def _per_sample(cfg, fn, vectors=True):
    def one(i):
        s = _sample(cfg, ["sample", i])
        return fn(eigh(s.entries) if vectors else np.linalg.eigvalsh(s.entries))
    return pool_map(one, range(cfg.stats.samples))


def cmd_stats(cfg: ExperimentConfig) -> dict:
    run = Run(cfg)
    kind = cfg.options["stat"]
    kappa, tau, n, w = cfg.stats.kappa, cfg.stats.tau, cfg.ensemble.n, cfg.ensemble.w
    desc = f"band(n={n},w={w},{cfg.ensemble.law},{cfg.ensemble.shape})"
    if kind == "deloc":
        vals = _per_sample(cfg, lambda sd: stats.deloc_sup(sd, kappa, tau)["max"])
        rec = stats.StatRecord("deloc_sup", desc, vals, kappa, thresholds={"tau": tau, "bound": n ** tau})
    elif kind == "que":
        vals = _per_sample(cfg, lambda sd: stats.que_windows(sd, w, kappa)["max"])
        rec = stats.StatRecord("que_max_deviation", desc, vals, kappa)
    elif kind == "ipr":
        vals = _per_sample(cfg, lambda sd: stats.localization_metrics(sd, kappa)["median"])
        rec = stats.StatRecord("ipr_median", desc, vals, kappa)
    elif kind == "gaps":
        vals = _per_sample(cfg, lambda e: stats.gap_ratios(e, kappa)["mean"], vectors=False)
        rec = stats.StatRecord("gap_ratio_mean", desc, vals, kappa)
        base = stats.goe_baseline(n, cfg.stats.samples, seed_derive(cfg.seed, ["goe"]), kappa)["gap_ratio"]
        run.csv("goe_baseline.csv", ["sample", "value"], list(enumerate(base.values)))
        rec.thresholds = {"goe_mean": base.aggregate["mean"], "goe_stderr": base.aggregate["stderr"]}
    elif kind == "local-law":
        width = cfg.options.get("width", 0.05)
        centers = cfg.stats.windows or [0.0]
        spectra = _per_sample(cfg, lambda e: e, vectors=False)
        rows = []
        for i, e in enumerate(spectra):
            for c in centers:
                r = stats.local_law_counts(e, c - width / 2, c + width / 2, tau)
                rows.append((i, c, r["count"], r["target"], r["deviation"], r["pass"]))
        run.csv("local_law.csv", ["sample", "center", "count", "target", "deviation", "pass"], rows)
        vals = [r[4] / r[3] for r in rows]
        rec = stats.StatRecord("local_law_relative_deviation", desc, vals, kappa, thresholds={"width": width})
    elif kind == "repulsion":
        spectra = _per_sample(cfg, lambda e: e, vectors=False)
        unfolded = [n * stats.semicircle_cdf(e[np.abs(e) <= 2 - kappa]) for e in spectra]
        rep = stats.level_repulsion(unfolded)
        run.csv("repulsion_cdf.csv", ["x", "cdf"], list(zip(rep["x"].tolist(), rep["cdf"].tolist())))
        rec = stats.StatRecord("repulsion_exponent", desc, [] if rep["exponent"] is None else [rep["exponent"]], kappa)
    else:
        raise ValueError(f"unknown statistic {kind!r}")
    rec.seeds = [seed_derive(cfg.seed, ["sample", i]) for i in range(cfg.stats.samples)]
    if kind not in ("local-law", "repulsion"):
        run.csv(f"{kind}.csv", ["sample", "value"], list(enumerate(map(float, rec.values))))
    return run.finish({rec.name: rec.as_dict()})


def cmd_compare_interpolate(cfg: ExperimentConfig) -> dict:
    run = Run(cfg)
    ens = cfg.ensemble
    prof = build_profile(ens.n, ens.w, ens.shape)
    law = EntryLaw.from_name(ens.law)
    matched = match_four_moments(law, ens.eps_m, ens.c, ens.w, ens.n)
    h0 = lambda i: sample_band(prof, law, ens.symmetry, seed_derive(cfg.seed, ["h0", i]))
    h1 = lambda i: sample_band(prof, matched, ens.symmetry, seed_derive(cfg.seed, ["h1", i]))
    thetas = cfg.options.get("thetas") or [0.0, 0.25, 0.5, 0.75, 1.0]
    res = stats.interpolation_continuity(h0, h1, thetas, cfg.stats.samples, seed_derive(cfg.seed, ["theta"]),
                                         cfg.stats.kappa)
    run.csv("interpolate.csv", ["theta", "gap_ratio_mean", "stderr"],
            list(zip(res["thetas"], res["means"], res["stderr"])))
    return run.finish(res)


def cmd_acceptance(cfg: ExperimentConfig) -> dict:
    from .acceptance import run_acceptance

    run = Run(cfg)
    only = cfg.options.get("only")
    results = run_acceptance(only, seed=cfg.seed, echo=print)
    for r in results:
        run.json(f"criterion_{r.number:02d}.json", r.as_dict())
    lines = [r.line() for r in results]
    (run.path("acceptance.txt")).write_text("\n".join(lines) + "\n")
    return run.finish({"pass": all(r.passed for r in results),
                       "criteria": {r.number: r.passed for r in results}})


COMMANDS = {
    "sample": cmd_sample, "spectrum": cmd_spectrum, "dbm couple": cmd_dbm_couple,
    "emf verify": cmd_emf_verify, "emf simulate": cmd_emf_simulate,
    "mfr trace": cmd_mfr_trace, "mfr slope": cmd_mfr_slope, "mfr project": cmd_mfr_project,
    "sc solve": cmd_sc_solve, "sc audit": cmd_sc_audit, "stats": cmd_stats,
    "compare interpolate": cmd_compare_interpolate, "acceptance": cmd_acceptance,
}


def run(config: ExperimentConfig) -> dict:
    try:
        fn = COMMANDS[config.command]
    except KeyError:
        raise ValueError(f"unknown command {config.command!r}") from None
    try:
        return fn(config)
    except Exception as exc:
        raise RuntimeError(f"{config.command} failed: {exc}") from exc
