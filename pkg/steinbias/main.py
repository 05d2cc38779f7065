#!/usr/bin/env python

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from steinbias import __version__
from steinbias.bounds import HALF_LINES, INTERVALS, VARIANTS, SmoothnessClass, size_bias_bound, zero_bias_bound
from steinbias.config import LOG_LEVELS, SBConfig
from steinbias.exceptions import InvalidConfigException, SteinBiasException, ValidationException
from steinbias.report import FORMATS, dumps, load_reports, summary_row, summary_table, write_csv, write_reports
from steinbias.runner import SWEEP_FIELDS, RunReport, Runner

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2


def setup_logs(level=logging.INFO):
    frm = "%(levelname)-.3s [%(asctime)s.%(msecs)03d] thr=%(thread)d %(name)s:%(lineno)d: %(message)s"
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(frm, "%Y%m%d-%H:%M:%S"))
    logging.basicConfig(level=level, handlers=[handler], force=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steinbias", description="zero-bias and size-bias couplings, checked")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", dest="config_path", help="config file path")
    common.add_argument("--seed", type=int, help="overrides every experiment seed")
    common.add_argument("--reps", type=int, help="overrides every replicate count")
    common.add_argument("--threads", type=int, help="worker threads, defaults to the cpu count")
    common.add_argument("--out", dest="out_dir", help="output directory")
    common.add_argument("--format", choices=FORMATS, default="json")
    common.add_argument("--log-level", dest="log_level", type=str.upper, choices=LOG_LEVELS)
    common.add_argument("-e", "--experiment", action="append", dest="experiments", help="run only these experiments")

    commands = parser.add_subparsers(dest="command", required=True)
    bound = commands.add_parser("bound", parents=[common], help="evaluate the bound formulas only")
    bound.add_argument("--sigma", type=float, help="standard deviation of Y")
    bound.add_argument("--B", dest="B", type=float, help="gap constant")
    bound.add_argument("--mu", type=float, help="mean of Y, selects the size-bias bound")
    bound.add_argument("--delta", type=float, help="Delta of the size-bias bound")
    bound.add_argument("--smoothness", nargs="+", default=[HALF_LINES, INTERVALS])
    bound.add_argument("--a", type=float, help="smoothness constant of a custom class")
    bound.add_argument("--variant", choices=VARIANTS)

    commands.add_parser("simulate", parents=[common], help="generate and spool draw streams")
    commands.add_parser("verify", parents=[common], help="run the check suites")
    sweep = commands.add_parser("sweep", parents=[common], help="run parameter sweeps")
    sweep.add_argument("-s", "--sweep", action="append", dest="sweeps", help="run only these sweeps")
    report = commands.add_parser("report", parents=[common], help="reformat stored run reports")
    report.add_argument("-i", "--input", dest="input_path", required=True, help="a stored reports.json")
    return parser


def load_config(args) -> SBConfig:
    if not args.config_path:
        raise InvalidConfigException(f"{args.command} needs --config")
    config = SBConfig.load(Path(args.config_path))
    if not args.log_level:
        logging.getLogger().setLevel(config.log_level)
    if args.out_dir:
        config.output_dir = Path(args.out_dir)
    return config


def _runner(args, config: SBConfig) -> Runner:
    for flag in ("seed", "reps", "threads"):
        value = getattr(args, flag)
        if value is not None and value < (0 if flag == "seed" else 1):
            raise InvalidConfigException(f"--{flag} out of range: {value}")
    return Runner(config, threads=args.threads, seed=args.seed, replicates=args.reps)


def _emit(reports: Sequence[RunReport], config: SBConfig, fmt: str) -> int:
    path = write_reports([r.to_dict() for r in reports], config.output_dir, fmt)
    print(summary_table([summary_row(r.to_dict()) for r in reports]))
    print(f"reports: {path}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK_FAILED


def cmd_bound(args) -> int:
    if args.config_path:
        config = load_config(args)
        return _emit(_runner(args, config).run_all(args.experiments, sample_draws=False), config, args.format)
    if args.sigma is None or args.B is None:
        raise InvalidConfigException("bound without --config needs --sigma and --B")
    reports = []
    for name in args.smoothness:
        smoothness = SmoothnessClass.from_name(name, args.a)
        variant = args.variant or smoothness.default_variant
        if args.mu is None:
            report = zero_bias_bound(args.sigma, args.B, smoothness, variant)
        else:
            report = size_bias_bound(args.mu, args.sigma, args.B, args.delta, smoothness, variant)
        reports.append(report.to_dict())
    if args.format == "csv":
        print(summary_table(reports, ["formula", "delta_bound", "A", "a", "precondition_ok", "vacuous"]))
    else:
        print(dumps(reports), end="")
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = load_config(args)
    reports = _runner(args, config).run_all(args.experiments, with_checks=False, spool=True)
    return _emit(reports, config, args.format)


def cmd_verify(args) -> int:
    config = load_config(args)
    return _emit(_runner(args, config).run_all(args.experiments), config, args.format)


def cmd_sweep(args) -> int:
    config = load_config(args)
    runner = _runner(args, config)
    names = args.sweeps or list(config.sweep)
    if not names:
        raise InvalidConfigException("sweep: the config has no [sweep.<id>] table")
    exit_code = EXIT_OK
    for name in names:
        rows = [row.to_row() for row in runner.sweep(name)]
        params = sorted(config.sweep[name].grid)
        path = write_csv(Path(config.output_dir) / f"sweep-{name}.csv", rows, [*params, *SWEEP_FIELDS])
        print(summary_table(rows, [*params, *SWEEP_FIELDS]))
        print(f"sweep {name}: {path}")
        if not all(row["pass"] for row in rows):
            exit_code = EXIT_CHECK_FAILED
    return exit_code


def cmd_report(args) -> int:
    data = load_reports(Path(args.input_path))
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.input_path).parent
    path = write_reports(data, out_dir, args.format)
    print(summary_table([summary_row(d) for d in data]))
    print(f"reports: {path}")
    return EXIT_OK


COMMANDS = {
    "bound": cmd_bound,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logs(args.log_level or logging.INFO)

    try:
        exit_code = COMMANDS[args.command](args)
    except InvalidConfigException as e:
        logger.error(f"config error: {e}")
        exit_code = EXIT_CONFIG_ERROR
    except ValidationException as e:
        logger.error(f"invalid input: {e}")
        exit_code = EXIT_CONFIG_ERROR
    except SteinBiasException as e:
        logger.error(f"{type(e).__name__}: {e}")
        exit_code = EXIT_CHECK_FAILED
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
