import argparse
import sys
from typing import Any, Dict

from config.defaults import DENSITY_DEFAULTS, ENSEMBLE_DEFAULTS, EXPERIMENT_KINDS, PARAM_DEFAULTS, RUN_DEFAULTS, Param


class LabArgumentParser(argparse.ArgumentParser):
    """
    Usage errors exit with status 1, the config-error status of the lab.
    """

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_param(group, name: str, param: Param, dest: str = None):
    default = param.default
    help_text = f"{param.help} (default: {list(default) if isinstance(default, tuple) else default})"
    dest = dest or name
    if isinstance(default, bool):
        group.add_argument(_flag(name), dest=dest, action=argparse.BooleanOptionalAction, default=None, help=help_text)
    elif isinstance(default, tuple):
        element = type(default[0]) if default else float
        group.add_argument(_flag(name), dest=dest, nargs="*", type=element, default=None, metavar="V", help=help_text)
    else:
        group.add_argument(_flag(name), dest=dest, type=type(default), default=None, help=help_text)


def _common_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--config", default=None, metavar="PATH", help="TOML config file; flags override its values")
    parser.add_argument("--terminal-output", action="store_true", help="log to the terminal instead of logs/<date>/")
    parser.add_argument("--log-level", default=None, help="logging level (default: RBM_LAB_LOG_LEVEL or INFO)")
    run = parser.add_argument_group("run")
    for name, param in RUN_DEFAULTS.items():
        _add_param(run, name, param)


def _ensemble_arguments(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("ensemble")
    for name, param in ENSEMBLE_DEFAULTS.items():
        _add_param(group, name, param)
    for name, param in DENSITY_DEFAULTS.items():
        _add_param(group, f"density_{name}", param)


def experiment_parser() -> LabArgumentParser:
    """
    ``rbm-lab`` parser: one subcommand per experiment kind plus ``all-acceptance``.

    Every config key gets a flag whose help shows its default. Flag values are ``None`` unless given,
    so only explicit flags override the config file.
    """
    parser = LabArgumentParser(prog="rbm-lab", description="Random band matrix numerical lab", allow_abbrev=False)
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for kind in EXPERIMENT_KINDS:
        sub = commands.add_parser(kind, help=f"run the {kind} experiment", allow_abbrev=False)
        _common_arguments(sub)
        _ensemble_arguments(sub)
        group = sub.add_argument_group(f"{kind} parameters")
        for name, param in PARAM_DEFAULTS[kind].items():
            _add_param(group, name, param)

    acceptance = commands.add_parser("all-acceptance", help="run the acceptance suite", allow_abbrev=False)
    _common_arguments(acceptance)
    acceptance.add_argument("--seed", type=int, default=ENSEMBLE_DEFAULTS["seed"].default, help="master seed (default: %(default)s)")
    acceptance.add_argument("--scale", type=float, default=1.0, help="sample-count multiplier in (0, 1] (default: %(default)s)")
    acceptance.add_argument("--criteria", type=int, nargs="*", default=None, metavar="K", help="criterion numbers to run (default: all)")
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """
    Flat override mapping for :func:`config.experiment.load_config`; unset flags are dropped.
    """
    names = set(RUN_DEFAULTS) | set(ENSEMBLE_DEFAULTS) | {f"density_{n}" for n in DENSITY_DEFAULTS}
    names |= set(PARAM_DEFAULTS.get(args.command, {}))
    return {name: getattr(args, name) for name in names if getattr(args, name, None) is not None}
