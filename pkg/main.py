import logging
import sys

from config.directory import results_directory
from config.experiment import load_config
from config.logging_cfg import setup_logging
from parser import experiment_parser, overrides_from_args
from utils.errors import AcceptanceFailure, InvalidConfigError, RbmLabError
from utils.harness import run, run_acceptance

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_ACCEPTANCE = 3

logger = logging.getLogger("rbm_lab")


def _print_summary(summary: dict, prefix: str = ""):
    for key, value in summary.items():
        if isinstance(value, dict):
            _print_summary(value, f"{prefix}{key}.")
        else:
            print(f"{prefix}{key}: {value}")


def acceptance(args) -> int:
    out = results_directory("all-acceptance", args.out)
    report = run_acceptance(args.seed, out, workers=args.workers or 1, scale=args.scale, only=args.criteria or None)
    for result in report.results:
        print(f"[{'PASS' if result.passed else 'FAIL'}] {result.number:2d} {result.title}")
    if not report.passed:
        raise AcceptanceFailure(f"criteria {', '.join(str(n) for n in report.failed)} failed")
    return EXIT_OK


def main(argv=None) -> int:
    args = experiment_parser().parse_args(argv)
    setup_logging(args.terminal_output, args.log_level)
    logger.critical("rbm-lab %s - START", args.command)
    try:
        if args.command == "all-acceptance":
            return acceptance(args)
        config = load_config(args.command, args.config, overrides_from_args(args))
        result = run(config)
        _print_summary(result.summary)
        print(f"results: {result.directory}")
        return EXIT_OK
    except InvalidConfigError as e:
        logger.error("Invalid configuration: %s", e)
        print(f"rbm-lab: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except AcceptanceFailure as e:
        logger.error("Acceptance failed: %s", e)
        print(f"rbm-lab: {e}", file=sys.stderr)
        return EXIT_ACCEPTANCE
    except RbmLabError as e:
        logger.error("Run failed: %s", e)
        print(f"rbm-lab: run failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception("Unexpected failure")
        print(f"rbm-lab: run failed: {e.__class__.__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        logger.critical("rbm-lab %s - END", args.command)


if __name__ == "__main__":
    sys.exit(main())
