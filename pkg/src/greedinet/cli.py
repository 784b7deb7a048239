"""Command-line front end.

Subcommands:
    run      one experiment (config file or preset), emit trace outputs
    compare  run several variants of one scenario, tabulate final MSD
    verify   run the bundled theory diagnostics and print the report
    presets  list available canned configurations

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import math
import sys
from dataclasses import replace

from .harness import (
    ConfigError,
    compare_variants,
    emit_outputs,
    load_config,
    run_experiment,
    verify_theory,
)
from .presets import PRESETS, get_preset, preset_names

DIHAT_VARIANTS = ("full", "estimate_only", "non_cooperative")
GREEDI_VARIANTS = ("full", "light", "centralized")


def _load_base_config(args):
    if bool(args.config) == bool(args.preset):
        raise ConfigError("exactly one of --config or --preset is required")
    if args.config:
        try:
            cfg = load_config(args.config)
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}") from e
    else:
        cfg = get_preset(args.preset)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.mc_runs is not None:
        overrides["mc_runs"] = args.mc_runs
    if getattr(args, "variant", None) and isinstance(args.variant, str):
        overrides["variant"] = args.variant
    return replace(cfg, **overrides) if overrides else cfg


def _add_common(p, variant_action="store"):
    p.add_argument("--config", help="path to a key = value config file")
    p.add_argument("--preset", help="name of a canned config (see `presets`)")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--mc-runs", type=int, dest="mc_runs", help="override mc_runs")
    p.add_argument("--out", default="greedinet-out", help="output directory")
    if variant_action == "store":
        p.add_argument("--variant", help="override the algorithm variant")
    else:
        p.add_argument(
            "--variant",
            action="append",
            help="variant to include (repeatable; default: all for the algorithm)",
        )


def _cmd_run(args):
    cfg = _load_base_config(args)
    trace = run_experiment(cfg)
    paths = emit_outputs({f"{cfg.algorithm}_{cfg.variant}": trace}, args.out)
    fin = trace.final_msd()
    db = f"{10.0 * math.log10(fin):.2f}" if fin > 0 else "-inf"
    print(f"{cfg.algorithm}/{cfg.variant}: {cfg.mc_runs} runs, final-window MSD {fin:.5e} ({db} dB)")
    for p in paths:
        print(f"  wrote {p}")
    return 0


def _cmd_compare(args):
    cfg = _load_base_config(args)
    variants = args.variant or list(
        DIHAT_VARIANTS if cfg.algorithm == "dihat" else GREEDI_VARIANTS
    )
    allowed = DIHAT_VARIANTS if cfg.algorithm == "dihat" else GREEDI_VARIANTS
    for v in variants:
        if v not in allowed:
            raise ConfigError(f"variant {v!r} invalid for {cfg.algorithm}")
    result = compare_variants([replace(cfg, variant=v) for v in variants], names=variants)
    paths = emit_outputs(result.traces, args.out)
    print(result.as_text())
    for p in paths:
        print(f"  wrote {p}")
    return 0


def _cmd_verify(args):
    report = verify_theory(master_seed=args.seed if args.seed is not None else 7)
    print(report.as_text())
    return 0


def _cmd_presets(_args):
    for name in preset_names():
        c = PRESETS[name]
        scale = (
            f"l={c.l}, iters={c.iters}"
            if c.algorithm == "dihat"
            else f"horizon={c.horizon}, zeta={c.zeta}"
        )
        print(
            f"{name:14s} {c.algorithm}/{c.variant:16s} "
            f"N={c.n_nodes}, m={c.m}, s={c.s}, {scale}, mc_runs={c.mc_runs}"
        )
    return 0


def build_parser():
    ap = argparse.ArgumentParser(
        prog="greedinet",
        description="Distributed sparse recovery experiments (DiHaT batch, GreeDi-LMS online).",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment and emit outputs")
    _add_common(p_run, variant_action="store")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="run variants of one scenario and tabulate")
    _add_common(p_cmp, variant_action="append")
    p_cmp.set_defaults(func=_cmd_compare)

    p_ver = sub.add_parser("verify", help="run the theory diagnostics report")
    p_ver.add_argument("--seed", type=int, help="seed for the diagnostic scenarios")
    p_ver.set_defaults(func=_cmd_verify)

    p_pre = sub.add_parser("presets", help="list canned configurations")
    p_pre.set_defaults(func=_cmd_presets)

    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except FloatingPointError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
