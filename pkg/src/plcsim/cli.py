"""Command line entry point: ``plcsim <verb> ...``.

Exit status: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import channel
from .config import ConfigError, load_config
from .medium import write_link_tables_csv
from .runner import build_simulation, run
from .scenario import scenario_dict

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

log = logging.getLogger("plcsim")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the configured seed")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="only report errors")
    return p


def make_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="plcsim", description="Multi-interface PLC network simulator", parents=[common])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", parents=[common], help="run a simulation and write all outputs")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: run.output_dir)")

    p = sub.add_parser("generate-scenario", parents=[common], help="write the two-ring smart grid scenario")
    p.add_argument("--out", required=True)

    p = sub.add_parser("link-table", parents=[common], help="write the initial link tables of all media")
    p.add_argument("config")
    p.add_argument("--out", required=True)

    p = sub.add_parser("curves", parents=[common], help="write SNR/BER/success over distance")
    p.add_argument("--d-max", type=float, default=5000.0)
    p.add_argument("--step", type=float, default=10.0)
    p.add_argument("--bytes", type=int, default=channel.REFERENCE_BYTES)
    p.add_argument("--snr0", type=float, default=channel.DEFAULT_SNR0_DB)
    p.add_argument("--out", required=True)

    p = sub.add_parser("validate", parents=[common], help="check a config file")
    p.add_argument("config")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    result, paths = run(cfg, args.out, getattr(args, "seed", None))
    stats = result.stats
    pdr = stats.pdr
    log.info("simulated %.1f s, %d trace lines, PDR %s", cfg.run.duration_s, len(result.sim.trace),
             "n/a" if pdr is None else f"{pdr:.4f}")
    for name, path in paths.items():
        log.info("  %-16s %s", name, path)
    return EXIT_OK


def _cmd_generate(args: argparse.Namespace) -> int:
    import json

    seed = getattr(args, "seed", 0)
    Path(args.out).write_text(json.dumps(scenario_dict(seed), indent=2) + "\n")
    log.info("wrote scenario (seed %d) to %s", seed, args.out)
    return EXIT_OK


def _cmd_link_table(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    sim, _ = build_simulation(cfg, getattr(args, "seed", None))
    with open(args.out, "w", newline="") as fh:
        write_link_tables_csv(sim.media.values(), fh)
    log.info("wrote %d link entries to %s", sum(len(m.link_table) for m in sim.media.values()), args.out)
    return EXIT_OK


def _cmd_curves(args: argparse.Namespace) -> int:
    params = channel.ChannelParams.calibrated(args.snr0)
    rows = channel.tabulate_curves(params, args.d_max, args.step, args.bytes)
    with open(args.out, "w", newline="") as fh:
        channel.write_curves_csv(rows, fh)
    log.info("gamma = %.6g dB/m; wrote %d rows to %s", params.gamma_db_per_m, len(rows), args.out)
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    log.info("%s: ok (%d devices, %d media, %d graphs)", args.config, len(cfg.devices), len(cfg.media), len(cfg.graphs))
    return EXIT_OK


COMMANDS = {
    "run": _cmd_run,
    "generate-scenario": _cmd_generate,
    "link-table": _cmd_link_table,
    "curves": _cmd_curves,
    "validate": _cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
        format="%(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        return COMMANDS[args.verb](args)
    except ConfigError as exc:
        for path, msg in exc.issues:
            log.error("config error: %s%s", f"{path}: " if path else "", msg)
        return EXIT_CONFIG
    except (OSError, RuntimeError, ValueError) as exc:
        log.error("error: %s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
