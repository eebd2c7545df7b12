"""Command line interface.

Every flag can also be given in a flat ``key = value`` file passed with
``--config``; command line flags take precedence. Keys are flag names with
dashes or underscores (``burn_in = 1000``), ``#`` starts a comment.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .base_measures import BaseMeasure, Family
from .calibration import gamma_fixed, gamma_hat, gamma_star, hierarchical_prior, psi, psi_inverse
from .gibbs import ChainConfig, HyperState, Strategy, run_chain
from .intensities import LAMBDA02_DECAY, TruthId, truth
from .mixture import GridFunction
from .point_process import load_events, save_events, simulate
from .study import ExperimentConfig, run_study, strategy_by_name
from .summaries import all_distances, summarize


def read_config(path) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SystemExit(f"{path}: line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _list_of(conv):
    def parse(text):
        return [conv(x) for x in str(text).replace(",", " ").split()]
    return parse


def _add_chain_flags(p):
    p.add_argument("--sweeps", type=int, default=5000, help="Gibbs sweeps")
    p.add_argument("--burn-in", type=int, default=2500)
    p.add_argument("--thin", type=int, default=10)
    p.add_argument("--zeta", type=float, default=1.0, help="slice threshold in (0, 1]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--a", type=float, default=2.0, help="base measure shape")
    p.add_argument("--T", type=float, default=8.0, help="horizon")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ebmono", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    truths = [t.value for t in TruthId]

    p = sub.add_parser("simulate", help="simulate a benchmark point process")
    p.add_argument("--config")
    p.add_argument("--truth", choices=truths, default="Lambda02")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--T", type=float, default=8.0)
    p.add_argument("--decay", type=float, default=LAMBDA02_DECAY)
    p.add_argument("--out", default="events.txt")

    p = sub.add_parser("fit", help="run the sampler on an event file")
    p.add_argument("--config")
    p.add_argument("--events", required=False)
    p.add_argument("--strategy", default="Empir",
                   help="Empir, Fixed, Hier1 or Hier2")
    p.add_argument("--rho", type=float, help="perturbation factor (Fixed)")
    p.add_argument("--sigma-gamma", type=float, help="prior sd of gamma (Hier1/Hier2)")
    p.add_argument("--truth", choices=truths,
                   help="true intensity, for Fixed calibration and distances")
    p.add_argument("--decay", type=float, default=LAMBDA02_DECAY)
    _add_chain_flags(p)
    p.add_argument("--out", default="fit_out")

    p = sub.add_parser("study", help="datasets x strategies batch")
    p.add_argument("--config")
    p.add_argument("--truths", type=_list_of(str), default=truths)
    p.add_argument("--ns", type=_list_of(int), default=[500, 1000, 2000])
    p.add_argument("--strategies", type=_list_of(str), default=["Empir", "Fixed", "Hier1", "Hier2"])
    p.add_argument("--rho", type=float, help="override the per-truth perturbation factor")
    p.add_argument("--sigma-gamma", type=float, help="override the per-truth prior sd")
    p.add_argument("--decay", type=float, default=LAMBDA02_DECAY)
    p.add_argument("--workers", type=int, default=1)
    _add_chain_flags(p)
    p.add_argument("--out", default="study_out")

    p = sub.add_parser("psi", help="evaluate or invert the calibration map")
    p.add_argument("--config")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--gamma", type=float, help="print psi(gamma)")
    g.add_argument("--target", type=float, help="print psi^-1(target)")
    g.add_argument("--truth", choices=truths, help="print the calibrated rate of a truth")
    p.add_argument("--decay", type=float, default=LAMBDA02_DECAY)
    p.add_argument("--a", type=float, default=2.0)
    p.add_argument("--T", type=float, default=8.0)
    return parser


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        conf = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(conf) - known
        if unknown:
            parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        sub.set_defaults(**conf)
        args = parser.parse_args(argv)
        # string defaults go through the flag's type; lists need it explicitly
        for a in sub._actions:
            val = getattr(args, a.dest, None)
            if a.dest in conf and isinstance(val, str) and a.type is not None:
                setattr(args, a.dest, a.type(val))
    return args


def cmd_simulate(args) -> int:
    lam = truth(args.truth, args.T, args.decay).normalized()
    sample = simulate(lam, args.n, args.T, args.seed)
    save_events(sample, args.out)
    print(f"wrote {sample.count} events to {args.out}")
    return 0


def cmd_fit(args) -> int:
    if not args.events:
        raise SystemExit("fit: --events is required")
    sample = load_events(args.events)
    spec = strategy_by_name(args.strategy, args.rho, args.sigma_gamma)
    T = sample.T
    if spec.kind is Strategy.FIXED_GAMMA:
        tid = args.truth or sample.truth_id
        if tid is None:
            raise SystemExit("fit: the Fixed strategy needs --truth")
        lam = truth(tid, T, args.decay)
        hyper = HyperState(gamma=gamma_fixed(spec.resolve(tid).rho, lam, args.a, T),
                           strategy=Strategy.FIXED_GAMMA)
    else:
        g_hat = gamma_hat(sample, args.a, T)
        if spec.kind is Strategy.EMPIRICAL_BAYES:
            hyper = HyperState(gamma=g_hat)
        else:
            tid = args.truth or sample.truth_id
            if spec.sigma is None and tid is None:
                raise SystemExit("fit: hierarchical strategies need --sigma-gamma or --truth")
            sigma = spec.sigma if spec.sigma is not None else spec.resolve(tid).sigma
            hyper = HyperState.hierarchical(*hierarchical_prior(g_hat, sigma))
    cfg = ChainConfig(args.sweeps, args.burn_in, args.thin, args.zeta, args.seed)
    base = BaseMeasure(Family.INV_SHIFTED_GAMMA, hyper.gamma, args.a, T)
    trace = run_chain(sample, sample.n, cfg, hyper, base)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace.to_csv(out / "trace.csv")
    trace.grid_to_csv(out / "lambda_grid.csv")
    print(f"strategy={spec.name} gamma={hyper.gamma:.6g} events={sample.count} "
          f"retained={len(trace)} wall={trace.wall_time:.1f}s")
    if len(trace):
        tid = args.truth or sample.truth_id
        target = truth(tid, T, args.decay).normalized()(trace.grid) if tid else None
        bands = summarize(trace, trace.grid)
        bands.to_csv(out / "bands.csv", truth=target)
        print(f"mean K={np.mean(trace.k_nonempty):.2f} mean M={np.mean(trace.M):.4f}")
        if target is not None:
            d = all_distances(bands.median, GridFunction(trace.grid, target))
            print(" ".join(f"{k}={v:.4g}" for k, v in d.items()))
    return 0


def cmd_study(args) -> int:
    specs = []
    for name in args.strategies:
        specs.append(strategy_by_name(name, args.rho, args.sigma_gamma))
    cfg = ExperimentConfig(truths=tuple(args.truths), ns=tuple(args.ns), strategies=tuple(specs),
                           n_iter=args.sweeps, burn_in=args.burn_in, thin=args.thin,
                           zeta=args.zeta, out_dir=Path(args.out), master_seed=args.seed,
                           a=args.a, T=args.T, decay=args.decay, workers=args.workers)
    records = run_study(cfg)
    for r in records:
        print(f"{r.truth:9s} n={r.n:<5d} {r.strategy:6s} {r.status:6s} "
              f"L1={r.L1:.4f} L2={r.L2:.3g} Sup={r.Sup:.4f} K={r.mean_K:.1f} "
              f"t={r.wall_time:.0f}s")
    return 0 if all(r.status == "ok" for r in records) else 1


def cmd_psi(args) -> int:
    if args.gamma is not None:
        print(f"{psi(args.gamma, args.a, args.T):.10g}")
    elif args.target is not None:
        print(f"{psi_inverse(args.target, args.a, args.T):.10g}")
    elif args.truth is not None:
        lam = truth(args.truth, args.T, args.decay)
        print(f"E_theo={lam.e_theo():.6g} gamma*={gamma_star(lam, args.a, args.T):.6g}")
    else:
        for tid in TruthId:
            lam = truth(tid, args.T, args.decay)
            print(f"{tid.value}: E_theo={lam.e_theo():.6g} "
                  f"gamma*={gamma_star(lam, args.a, args.T):.6g}")
    return 0


def main(argv=None) -> int:
    args = _parse(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"simulate": cmd_simulate, "fit": cmd_fit, "study": cmd_study, "psi": cmd_psi}
    try:
        return handler[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"ebmono {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
