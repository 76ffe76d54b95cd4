"""Command line interface: ``rbmlab <command> [subcommand] [flags]``."""
from __future__ import annotations

import argparse
import json
import sys

from .config import EmfSpec, EnsembleSpec, ExperimentConfig, FlowSpec, StatsSpec
from .experiments import run

STATS = ["deloc", "que", "local-law", "gaps", "repulsion", "ipr"]


def _common(p: argparse.ArgumentParser, n=200, w=20, samples=1):
    p.add_argument("--n", type=int, default=n, help="matrix size N")
    p.add_argument("--w", type=int, default=w, help="band width W")
    p.add_argument("--law", default="gaussian", help="entry law: gaussian, uniform, rademacher, three_point:p:a")
    p.add_argument("--shape", default="uniform", choices=["uniform", "triangular"])
    p.add_argument("--class", dest="cls", default="symmetric", choices=["symmetric", "hermitian", "both"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="results")
    p.add_argument("--samples", type=int, default=samples)
    p.add_argument("--kappa", type=float, default=0.1)
    p.add_argument("--tau", type=float, default=0.3)
    p.add_argument("--A", type=float, default=None, help="regularize with N^-A times a GOE matrix")
    p.add_argument("--matched", action="store_true", help="replace the law by its four-moment match")
    p.add_argument("--eps-m", type=float, default=0.1)
    p.add_argument("--c", type=float, default=0.1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rbmlab", description="Random band matrix experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw band matrices (RBM1 files)")
    _common(p)
    p = sub.add_parser("spectrum", help="eigendecomposition of a sample")
    _common(p)
    p.add_argument("--input", help="RBM1 file to read instead of sampling")
    p.add_argument("--backend", default="lapack", choices=["lapack", "native"])

    dbm = sub.add_parser("dbm").add_subparsers(dest="sub", required=True)
    p = dbm.add_parser("couple", help="SDE route vs matrix route")
    _common(p, n=5)
    p.add_argument("--t", type=float, default=0.2)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--paths", type=int, default=20000)

    emf = sub.add_parser("emf").add_subparsers(dest="sub", required=True)
    p = emf.add_parser("verify", help="check the moment-flow generator identity")
    _common(p)
    p.add_argument("--sites", type=int, default=4)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--route", default="symbolic", choices=["symbolic", "numeric"])
    p.add_argument("--instances", type=int, default=200)
    p = emf.add_parser("simulate", help="Monte Carlo of the flow against the master equation")
    _common(p)
    p.add_argument("--sites", type=int, default=6)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--t", type=float, default=0.5)
    p.add_argument("--dt", type=float, default=0.005)
    p.add_argument("--paths", type=int, default=20000)
    p.add_argument("--cutoff", type=int, default=None)

    mfr = sub.add_parser("mfr").add_subparsers(dest="sub", required=True)
    p = mfr.add_parser("trace", help="trace the curves C_k(e)")
    _common(p, n=200, w=60)
    p.add_argument("--e-lo", type=float, default=-0.3)
    p.add_argument("--e-hi", type=float, default=0.3)
    p.add_argument("--step", type=float, default=0.002)
    p = mfr.add_parser("slope", help="finite-difference slope check")
    _common(p, n=400, w=100)
    p.add_argument("--fd-step", type=float, default=1e-5)
    p.add_argument("--labels", type=int, nargs="*")
    p = mfr.add_parser("project", help="projection ratios r_j")
    _common(p, n=800, w=210, samples=20)
    p.add_argument("--e0", type=float, default=0.0)
    p.add_argument("--window", type=float, default=None)

    sc = sub.add_parser("sc").add_subparsers(dest="sub", required=True)
    p = sc.add_parser("solve", help="solve the self-consistent equation")
    _common(p, n=300, w=50, samples=0)
    p.add_argument("--z-re", type=float, default=0.0)
    p.add_argument("--z-im", type=float, default=0.05)
    p.add_argument("--e", type=float, default=0.0)
    p.add_argument("--zeta", type=float, default=0.0)
    p = sc.add_parser("audit", help="regularity audit of Q_e")
    _common(p, n=400, w=100)
    p.add_argument("--e-values", type=float, nargs="*")

    st = sub.add_parser("stats").add_subparsers(dest="sub", required=True)
    for name in STATS:
        p = st.add_parser(name)
        _common(p, n=1000, w=100, samples=10)
        if name == "local-law":
            p.add_argument("--width", type=float, default=0.05)
            p.add_argument("--centers", type=float, nargs="*", default=[0.0])

    cmp_ = sub.add_parser("compare").add_subparsers(dest="sub", required=True)
    p = cmp_.add_parser("interpolate", help="gap ratios along the interpolation H^theta")
    _common(p, n=300, w=30, samples=12)
    p.add_argument("--thetas", type=float, nargs="*")

    p = sub.add_parser("acceptance", help="run the acceptance criteria")
    p.add_argument("--only", type=int, nargs="*")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="results/acceptance")

    p = sub.add_parser("run", help="run an experiment from a JSON config file")
    p.add_argument("config")
    return ap


_OPTION_KEYS = ["input", "backend", "route", "instances", "e_lo", "e_hi", "step", "fd_step", "labels", "e0",
                "window", "z_re", "z_im", "e", "zeta", "e_values", "width", "thetas", "only"]


def config_from_args(args) -> ExperimentConfig:
    command = args.command if not getattr(args, "sub", None) else f"{args.command} {args.sub}"
    options = {k: getattr(args, k) for k in _OPTION_KEYS if getattr(args, k, None) is not None}
    if args.command == "acceptance":
        from .acceptance import MASTER_SEED
        return ExperimentConfig("acceptance", seed=MASTER_SEED if args.seed is None else args.seed,
                                out=args.out, options=options)
    if args.command == "stats":
        options["stat"] = args.sub
        command = "stats"
    if getattr(args, "matched", False):
        options["matched"] = True
    ens = EnsembleSpec(n=args.n, w=args.w, law=args.law, shape=args.shape,
                       symmetry="symmetric" if args.cls == "both" else args.cls,
                       eps_m=args.eps_m, c=args.c, A=args.A)
    flow = FlowSpec(t=getattr(args, "t", 0.2), dt=getattr(args, "dt", 0.01), paths=getattr(args, "paths", 10000))
    emf = EmfSpec(sites=getattr(args, "sites", 4), d=getattr(args, "d", 2), cls=args.cls,
                  cutoff=getattr(args, "cutoff", None))
    st = StatsSpec(kappa=args.kappa, tau=args.tau, samples=args.samples, windows=list(getattr(args, "centers", []) or []))
    return ExperimentConfig(command, ens, flow, emf, st, seed=args.seed, out=args.out, options=options)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = ExperimentConfig.load(args.config) if args.command == "run" else config_from_args(args)
    try:
        summary = run(cfg)
    except (RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if cfg.command == "acceptance":
        return 0 if summary["pass"] else 1
    print(json.dumps({"out": cfg.out, "summary_keys": sorted(summary)}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
