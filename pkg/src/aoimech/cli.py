"""Command-line interface: ``aoimech <subcommand> ...``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 a requested
property check failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .baselines import BenchmarkMechanism, CompleteInformationPricing
from .config import RunConfig, canonical_hash, load_experiment_config
from .errors import AoiMechError, ConfigError, DomainError, InfeasibleError, NumericalError, ResourceError
from .experiments import CSV_HEADER, closed_forms, run_sweep
from .mech_multi import MultiSourceMechanism
from .mech_quantized import build_quantized, loss_bound
from .mech_single import NaiveMechanism, SingleSourceMechanism
from .verify_sim import simulate, verify_ic

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_VERDICT = 0, 1, 2, 3


def fmt(x):
    """Numbers with 12 significant digits; non-finite values spelled out."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x + 0.0, ".12g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(fmt(x)) if math.isfinite(x) else fmt(x)
    return obj


def _metadata(config_hash, seed, **extra):
    return {"tool": f"aoimech {__version__}", "config_sha256": config_hash, "seed": seed, **extra}


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _csv_text(meta, header, rows):
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in r])
    return buf.getvalue()


def _json_text(meta, payload):
    return json.dumps(_jsonable({"metadata": meta, **payload}), indent=2, sort_keys=True) + "\n"


def _costs(text, n):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"--costs must be comma-separated numbers, got {text!r}") from exc
    if len(vals) != n:
        raise ConfigError(f"--costs needs {n} values, got {len(vals)}")
    return np.array(vals)


def _options_hash(cfg, **opts):
    return canonical_hash({"config": cfg.raw, "options": opts})


def _single(cfg):
    if len(cfg.profile) != 1:
        raise ConfigError("this command needs a config with exactly one source")
    src = cfg.profile[0]
    return SingleSourceMechanism(src.dist, cfg.aoi, src.f_max)


def _build(cfg, kind, delta=None):
    single = len(cfg.profile) == 1
    if kind == "optimal":
        return _single(cfg) if single else MultiSourceMechanism(cfg.profile, cfg.aoi)
    if kind == "quantized":
        base = _single(cfg) if single else MultiSourceMechanism(cfg.profile, cfg.aoi)
        return build_quantized(base, cfg.delta_q if delta is None else delta)
    if kind == "benchmark":
        return BenchmarkMechanism(cfg.profile, cfg.aoi)
    if kind == "naive":
        src = _single(cfg)
        return NaiveMechanism(src.dist, cfg.aoi, src.f_max)
    raise ConfigError(f"unknown mechanism {kind!r}")


# subcommands ------------------------------------------------------------------

def cmd_mechanism(args):
    cfg = RunConfig.load(args.config)
    if args.kind == "single":
        mech = _single(cfg)
        n = args.grid or cfg.grids.get("mechanism", 200)
        cs = np.linspace(mech.c_low, mech.c_high, n)
        f = mech.rate(cs)
        h = mech.payments_on_grid(cs)
        rows = []
        for c, fi, hi in zip(cs, f, h):
            if fi > 0:
                rows.append((c, fi, hi, hi / fi, 1.0 / fi))
            else:
                rows.append((c, fi, hi, "no-trade", "no-trade"))
        meta = _metadata(_options_hash(cfg, kind="single", grid=n), cfg.seed)
        _write(args.out, _csv_text(meta, ("c", "f", "h", "p", "x"), rows))
        return EXIT_OK
    mech = MultiSourceMechanism(cfg.profile, cfg.aoi)
    costs = _costs(args.costs, len(cfg.profile))
    alloc = mech.allocate(costs, with_payments=True)
    meta = _metadata(_options_hash(cfg, kind="multi", costs=costs.tolist()), cfg.seed)
    _write(args.out, _json_text(meta, {"costs": costs, **alloc.to_dict(), "no_trade": alloc.no_trade}))
    return EXIT_OK


def cmd_quantize(args):
    cfg = RunConfig.load(args.config)
    delta = args.delta if args.delta is not None else cfg.delta_q
    q = build_quantized(_single(cfg), delta)
    meta = _metadata(_options_hash(cfg, delta=delta), cfg.seed,
                     quantizer="cells anchored at c_low; c_high in last cell; midpoints clamped into support",
                     cells=len(q.quantizer), loss_bound=fmt(loss_bound(q, delta)))
    header = ("cell_lo", "cell_hi", "midpoint", "f_q", "h_q_at_midpoint")
    _write(args.out, _csv_text(meta, header, q.cell_table()))
    return EXIT_OK


def cmd_baseline(args):
    cfg = RunConfig.load(args.config)
    costs = _costs(args.costs, len(cfg.profile))
    cls = BenchmarkMechanism if args.kind == "benchmark" else CompleteInformationPricing
    alloc = cls(cfg.profile, cfg.aoi).allocate(costs)
    meta = _metadata(_options_hash(cfg, kind=args.kind, costs=costs.tolist()), cfg.seed)
    _write(args.out, _json_text(meta, {"kind": args.kind, "costs": costs, **alloc.to_dict()}))
    return EXIT_OK


def cmd_verify(args):
    cfg = RunConfig.load(args.config)
    mech = _build(cfg, args.mechanism)
    n_true = cfg.grids.get("true", 200)
    n_rep = cfg.grids.get("report", 400)
    tol = cfg.tolerances.get("ic", 1e-6)
    seed = cfg.seed if args.seed is None else args.seed
    rep = verify_ic(mech, n_true, n_rep, tol, cfg.draws, seed)
    meta = _metadata(_options_hash(cfg, mechanism=args.mechanism, seed=seed), seed)
    _write(args.out, _json_text(meta, {"mechanism": args.mechanism, **rep.to_dict()}))
    return EXIT_OK if (rep.ic and rep.ir) else EXIT_VERDICT


def cmd_simulate(args):
    cfg = RunConfig.load(args.config)
    mech = _build(cfg, args.mechanism)
    costs = _costs(args.costs, len(cfg.profile)) if args.costs else \
        np.array([d.mean() for d in cfg.profile.dists])
    seed = cfg.seed if args.seed is None else args.seed
    trace = simulate(mech, costs, args.updates, seed, cfg.aoi)
    exp = trace.expected_rates()
    meta = _metadata(_options_hash(cfg, mechanism=args.mechanism, costs=costs.tolist(),
                                   updates=args.updates, seed=seed), seed,
                     destination_rate=fmt(trace.destination_rate),
                     destination_rate_expected=fmt(exp["destination_rate"]),
                     source_payoff_rates=" ".join(fmt(v) for v in trace.source_payoff_rates),
                     source_payoff_rates_expected=" ".join(fmt(v) for v in exp["source_payoff_rates"]))
    times = trace.update_times[1:]
    rows = zip(range(1, trace.K + 1), times, trace.interarrivals, trace.selected, trace.paid)
    _write(args.out, _csv_text(meta, ("k", "time", "interarrival", "source", "payment"), rows))
    return EXIT_OK


def cmd_experiment(args):
    settings, cfg_seed, digest = ({}, None, canonical_hash({})) if args.config is None \
        else load_experiment_config(args.config)
    seed = args.seed if args.seed is not None else (cfg_seed or 0)
    rows = run_sweep(args.name, settings, seed=seed, threads=args.threads)
    meta = _metadata(canonical_hash({"config": digest, "name": args.name}), seed)
    _write(args.out, _csv_text(meta, CSV_HEADER, ([r[k] for k in CSV_HEADER] for r in rows)))
    return EXIT_OK


def cmd_closed_forms(args):
    res = closed_forms(args.setting, args.alpha, args.c_high, args.c_low, args.mu)
    keys = ["J_B", "J_C", "J_star", "ratio_B_C", "ratio_star_C", "bound_B_C", "bound_star_C"]
    if "J_C_incomplete_gamma" in res:
        keys.append("J_C_incomplete_gamma")
    lines = [f"{k:<22} {fmt(res[k])}" for k in keys]
    _write(args.out, f"# setting: {args.setting} alpha={fmt(args.alpha)} c_low={fmt(res['c_low'])} "
                     f"c_high={fmt(args.c_high)}\n" + "\n".join(lines) + "\n")
    return EXIT_OK


# parser -----------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_INVALID)


def build_parser():
    p = _Parser(prog="aoimech", description="Mechanisms for buying fresh data from strategic sources.")
    p.add_argument("--version", action="version", version=f"aoimech {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    m = sub.add_parser("mechanism", help="tabulate the optimal mechanism")
    m.add_argument("kind", choices=["single", "multi"])
    m.add_argument("--config", required=True)
    m.add_argument("--grid", type=int)
    m.add_argument("--costs", help="comma-separated reported costs (multi)")
    m.add_argument("--out")
    m.set_defaults(func=cmd_mechanism)

    q = sub.add_parser("quantize", help="cell table of the quantized mechanism")
    q.add_argument("--config", required=True)
    q.add_argument("--delta", type=float)
    q.add_argument("--out")
    q.set_defaults(func=cmd_quantize)

    b = sub.add_parser("baseline", help="benchmark or complete-information allocation")
    b.add_argument("--kind", choices=["benchmark", "complete"], required=True)
    b.add_argument("--config", required=True)
    b.add_argument("--costs", required=True)
    b.add_argument("--out")
    b.set_defaults(func=cmd_baseline)

    v = sub.add_parser("verify", help="IC/IR deviation search")
    v.add_argument("--config", required=True)
    v.add_argument("--mechanism", choices=["optimal", "quantized", "benchmark", "naive"], default="optimal")
    v.add_argument("--seed", type=int)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("simulate", help="discrete-event AoI simulation")
    s.add_argument("--config", required=True)
    s.add_argument("--mechanism", choices=["optimal", "quantized", "benchmark"], default="optimal")
    s.add_argument("--costs")
    s.add_argument("--updates", type=int, default=100_000)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("experiment", help="parameter sweeps")
    e.add_argument("--name", choices=["quantloss", "fig5", "fig6", "fig7", "fig8"], required=True)
    e.add_argument("--config")
    e.add_argument("--seed", type=int)
    e.add_argument("--threads", type=int)
    e.add_argument("--out")
    e.set_defaults(func=cmd_experiment)

    c = sub.add_parser("closed-forms", help="reference values for one source")
    c.add_argument("--setting", choices=["uniform", "trunc_exp"], required=True)
    c.add_argument("--alpha", type=float, required=True)
    c.add_argument("--c-high", type=float, required=True)
    c.add_argument("--c-low", type=float, default=0.0)
    c.add_argument("--mu", type=float, default=1.0)
    c.add_argument("--out")
    c.set_defaults(func=cmd_closed_forms)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_INVALID
    if args.command == "mechanism" and args.kind == "multi" and not args.costs:
        sys.stderr.write("aoimech: error: mechanism multi needs --costs\n")
        return EXIT_INVALID
    try:
        return args.func(args)
    except (NumericalError, InfeasibleError, ResourceError) as exc:
        sys.stderr.write(f"aoimech: numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except (ConfigError, DomainError) as exc:
        sys.stderr.write(f"aoimech: invalid input: {exc}\n")
        return EXIT_INVALID
    except AoiMechError as exc:
        sys.stderr.write(f"aoimech: error: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
