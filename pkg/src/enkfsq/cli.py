"""Command-line front-end for the twin-experiment harness.

Subcommands map one-to-one onto harness operations::

    enkfsq run            --config l40_desk.cfg --out results/
    enkfsq sweep-n        --config l40_desk.cfg --out results/
    enkfsq sweep-limit    --config l40_desk.cfg --out results/
    enkfsq sweep-alpha    --config l40_desk.cfg --out results/
    enkfsq posterior-demo --prior-mean 0 --prior-std 1 --mu 1 \
                          --sigma-obs 0.3 --sigma-or 1.5 --out results/
    enkfsq climatology    --config l40_desk.cfg --out results/

Flags override config-file keys. The output directory falls back to the
ENKFSQ_OUT_DIR environment variable when --out is omitted. Exit status is 0
on success, 1 on configuration/usage errors, 2 on runtime errors (including
flagged filter divergence).
"""

import argparse
import os
import sys
from pathlib import Path

from .config import ConfigError, parse_config_file
from .harness import (
    build_climatology,
    posterior_demo,
    run_twin_experiment,
    sweep_alpha,
    sweep_detection_limit,
    sweep_ensemble_size,
    write_run_csv,
    write_sweep_csv,
)
from .observations import TwoPieceGaussian, save_climatology

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_common(parser, needs_config=True):
    if needs_config:
        parser.add_argument("--config", required=True, help="key=value config file")
    parser.add_argument("--out", help="output directory (default: $ENKFSQ_OUT_DIR or ./runs)")
    parser.add_argument("--seed", type=int,
                        help="replace the configured seed list with SEED, SEED+1, ...")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads; results are identical for any value")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")


def _build_parser():
    parser = _Parser(prog="enkfsq", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command")

    for name, helptext in (
        ("run", "run the configured twin experiment over all seeds"),
        ("sweep-n", "ensemble-size sweep"),
        ("sweep-limit", "detection-limit (OR fraction) sweep"),
        ("sweep-alpha", "OR-error scaling sweep"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        if name == "sweep-n":
            p.add_argument("--sizes", help="comma-separated ensemble sizes")
        elif name == "sweep-limit":
            p.add_argument("--fractions", help="comma-separated OR fractions")
        elif name == "sweep-alpha":
            p.add_argument("--alphas", help="comma-separated scale factors")

    p = sub.add_parser("posterior-demo",
                       help="scalar Bayes-vs-update posterior comparison")
    p.add_argument("--prior-mean", type=float, required=True)
    p.add_argument("--prior-std", type=float, required=True)
    p.add_argument("--mu", type=float, required=True, help="detection limit")
    p.add_argument("--sigma-obs", type=float, required=True)
    p.add_argument("--sigma-or", type=float, required=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--proposal-std", type=float)
    _add_common(p, needs_config=False)

    p = sub.add_parser("climatology", help="build and cache the climatology sample")
    _add_common(p)
    return parser


def _out_dir(args):
    out = args.out or os.environ.get("ENKFSQ_OUT_DIR") or "runs"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(args):
    overrides = {}
    cfg = parse_config_file(args.config, overrides)
    if args.seed is not None:
        cfg = parse_config_file(
            args.config,
            {"seeds": tuple(args.seed + i for i in range(len(cfg.seeds)))},
        )
    return cfg


def _say(args, text):
    if not args.quiet:
        print(text)


def _record_name(cfg, record, tag=""):
    stem = cfg.label or cfg.model
    middle = f"_{tag}" if tag else ""
    return f"{stem}_{record.scheme}{middle}_seed{record.seed}.csv"


def _emit_records(args, cfg, records, out, tag=""):
    status = 0
    for rec in records:
        path = out / _record_name(cfg, rec, tag)
        write_run_csv(path, rec)
        flag = " DIVERGED" if rec.diverged else ""
        or_frac = (rec.or_counts.mean() / max(len(cfg.sites), 1)
                   if rec.or_counts.size else float("nan"))
        _say(args, f"run model={cfg.model} filter={rec.scheme} seed={rec.seed} "
                   f"rmse={rec.metrics.time_avg_rmse:.4f} "
                   f"or_frac={or_frac:.2f}{flag} -> {path}")
        if rec.diverged:
            status = 2
    return status


def _cmd_run(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    records = run_twin_experiment(cfg, threads=args.threads)
    return _emit_records(args, cfg, records, out)


def _parse_grid(text, cast):
    return tuple(cast(tok) for tok in text.split(",") if tok.strip())


def _emit_sweep(args, cfg, sweep, out, tag_fmt):
    path = out / f"sweep_{sweep.name}.csv"
    write_sweep_csv(path, sweep)
    _say(args, f"sweep {sweep.name}: {len(sweep.rows)} rows -> {path}")
    status = 0
    seen = set()
    for (value, _scheme), records in sweep.records.items():
        if id(records) in seen:  # shared reference runs are written once
            continue
        seen.add(id(records))
        status = max(status,
                     _emit_records(args, cfg, records, out, tag=tag_fmt.format(value)))
    return status


def _cmd_sweep_n(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    kwargs = {"threads": args.threads}
    if args.sizes:
        kwargs["sizes"] = _parse_grid(args.sizes, int)
    sweep = sweep_ensemble_size(cfg, **kwargs)
    return _emit_sweep(args, cfg, sweep, out, "N{}")


def _cmd_sweep_limit(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    kwargs = {"threads": args.threads}
    if args.fractions:
        kwargs["or_fractions"] = _parse_grid(args.fractions, float)
    sweep = sweep_detection_limit(cfg, **kwargs)
    return _emit_sweep(args, cfg, sweep, out, "or{}")


def _cmd_sweep_alpha(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    kwargs = {"threads": args.threads}
    if args.alphas:
        kwargs["alphas"] = _parse_grid(args.alphas, float)
    sweep = sweep_alpha(cfg, **kwargs)
    return _emit_sweep(args, cfg, sweep, out, "alpha{}")


def _cmd_posterior_demo(args):
    out = _out_dir(args)
    likelihood = TwoPieceGaussian(mu=args.mu, sigma1=args.sigma_obs,
                                  sigma2=args.sigma_or)
    demo = posterior_demo(args.prior_mean, args.prior_std, likelihood,
                          n_samples=args.samples, seed=args.seed or 0,
                          proposal_std=args.proposal_std)
    path = out / "posterior_demo.csv"
    demo.write_csv(path)
    _say(args, f"posterior-demo modes: bayes={demo.bayes_mode:.4f} "
               f"update={demo.enkfsq_mode:.4f} spreads: bayes={demo.bayes_spread:.4f} "
               f"update={demo.enkfsq_spread:.4f} "
               f"acceptance={demo.acceptance_rate:.3f} -> {path}")
    return 0


def _cmd_climatology(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    clim = build_climatology(cfg, seed)
    path = out / f"{cfg.model}_climatology.csv"
    save_climatology(path, clim)
    _say(args, f"climatology: {clim.samples.size} samples "
               f"[{clim.samples.min():.3f}, {clim.samples.max():.3f}] -> {path}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sweep-n": _cmd_sweep_n,
    "sweep-limit": _cmd_sweep_limit,
    "sweep-alpha": _cmd_sweep_alpha,
    "posterior-demo": _cmd_posterior_demo,
    "climatology": _cmd_climatology,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    if not args.command:
        parser.print_help(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
