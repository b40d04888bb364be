"""
.. module:: experiment
   :platform: Python
   :synopsis: Experiment configuration loaded from TOML files and command-line overrides.

Module `experiment` turns a config file plus flag overrides into a validated
:class:`ExperimentConfig`. Flags win over file values. Unknown keys and badly typed values raise
:class:`~utils.errors.InvalidConfigError` anchored at the file line they appear on.
"""

import logging
import re
import tomllib
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from config.defaults import DENSITY_DEFAULTS, ENSEMBLE_DEFAULTS, EXPERIMENT_KINDS, PARAM_DEFAULTS, RUN_DEFAULTS, param_defaults
from utils.ensemble.band_matrix import EnsembleConfig
from utils.ensemble.density import DensitySpec
from utils.errors import InvalidConfigError

logger = logging.getLogger(__name__)

_TABLE = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-\" ]+?)\s*\]\s*(#.*)?$")
_KEY = re.compile(r"^\s*\"?([A-Za-z0-9_\-]+)\"?\s*=")
_DECODE_LINE = re.compile(r"line (\d+)")

KeyLines = Dict[Tuple[str, ...], int]


def _key_lines(text: str) -> KeyLines:
    """
    Map ``(table..., key)`` paths to the 1-based line they are defined on.
    """
    lines: KeyLines = {}
    table: Tuple[str, ...] = ()
    for number, raw in enumerate(text.splitlines(), start=1):
        header = _TABLE.match(raw)
        if header:
            table = tuple(part.strip().strip('"') for part in header.group(1).split("."))
            lines.setdefault(table, number)
            continue
        key = _KEY.match(raw)
        if key:
            lines.setdefault(table + (key.group(1),), number)
    return lines


def read_config_file(path: str) -> Tuple[dict, KeyLines]:
    """
    Parse a TOML config file.

    :param path: File path.
    :return: The document and the line of every key in it.
    :raises InvalidConfigError: When the file is unreadable or not valid TOML.
    """
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise InvalidConfigError(f"cannot read config file: {e.strerror}", source=path) from None
    text = raw.decode("utf-8", errors="replace")
    try:
        document = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        found = _DECODE_LINE.search(str(e))
        raise InvalidConfigError(f"invalid TOML: {e}", line=int(found.group(1)) if found else None, source=path) from None
    return document, _key_lines(text)


def _coerce(name: str, value: Any, default: Any) -> Any:
    """
    Convert ``value`` to the type of ``default``; lists become tuples.
    """
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise InvalidConfigError(f"'{name}' must be true or false, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise InvalidConfigError(f"'{name}' must be a list, got {value!r}")
        element = default[0] if default else 0.0
        return tuple(_coerce(name, v, element) for v in value)
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise InvalidConfigError(f"'{name}' must be an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidConfigError(f"'{name}' must be a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise InvalidConfigError(f"'{name}' must be a string, got {value!r}")
        return value
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Everything one run depends on.

    :param kind: One of :data:`~config.defaults.EXPERIMENT_KINDS`.
    :param ensemble: Ensemble block; ``ensemble.master_seed`` is the master seed of the run.
    :param params: Kind-specific parameters, complete with defaults.
    :param out: Output directory, empty for the dated default.
    :param workers: Worker process count.
    """

    kind: str
    ensemble: EnsembleConfig
    params: Dict[str, Any] = field(default_factory=dict)
    out: str = ""
    workers: int = 1

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise InvalidConfigError(f"unknown experiment kind '{self.kind}'; expected one of {', '.join(EXPERIMENT_KINDS)}")
        if self.workers < 1:
            raise InvalidConfigError(f"workers must be >= 1, got {self.workers}")

    @property
    def master_seed(self) -> int:
        return self.ensemble.master_seed

    def param(self, name: str) -> Any:
        return self.params[name]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "out": self.out,
            "workers": self.workers,
            "ensemble": self.ensemble.to_dict(),
            "params": {k: list(v) if isinstance(v, tuple) else v for k, v in self.params.items()},
        }

    @classmethod
    def from_dict(cls, document: dict, lines: Optional[KeyLines] = None, source: Optional[str] = None) -> "ExperimentConfig":
        """
        Validate a config document; missing parameters take their defaults.

        :param document: Parsed TOML, or the output of :meth:`to_dict`.
        :param lines: Key lines from :func:`read_config_file` for line-anchored errors.
        :param source: File name used in error messages.
        """
        lines = lines or {}

        def fail(message: str, path: Tuple[str, ...]):
            raise InvalidConfigError(message, line=lines.get(path), source=source)

        for key in document:
            if key not in ("kind", "out", "workers", "ensemble", "params"):
                fail(f"unknown key '{key}'", (key,))
        kind = document.get("kind")
        if kind not in EXPERIMENT_KINDS:
            fail(f"unknown experiment kind {kind!r}; expected one of {', '.join(EXPERIMENT_KINDS)}", ("kind",))

        block = dict(document.get("ensemble", {}))
        density = dict(block.pop("density", {}))
        for key in block:
            if key not in ("N", "L", "seed"):
                fail(f"unknown ensemble key '{key}'", ("ensemble", key))
        for key in density:
            if key not in DENSITY_DEFAULTS and key != "table":
                fail(f"unknown density key '{key}'", ("ensemble", "density", key))
        try:
            ensemble = EnsembleConfig(
                half_size=_coerce("N", block.get("N", ENSEMBLE_DEFAULTS["N"].default), 0),
                bandwidth_half=_coerce("L", block.get("L", ENSEMBLE_DEFAULTS["L"].default), 0),
                density=DensitySpec.from_dict(density),
                master_seed=_coerce("seed", block.get("seed", ENSEMBLE_DEFAULTS["seed"].default), 0),
            )
        except InvalidConfigError as e:
            fail(e.message, ("ensemble",))

        params = param_defaults(kind)
        for key, value in document.get("params", {}).items():
            if key not in PARAM_DEFAULTS[kind]:
                fail(f"unknown parameter '{key}' for experiment '{kind}'", ("params", key))
            try:
                params[key] = _coerce(key, value, PARAM_DEFAULTS[kind][key].default)
            except InvalidConfigError as e:
                fail(e.message, ("params", key))
        try:
            out = _coerce("out", document.get("out", RUN_DEFAULTS["out"].default), "")
            workers = _coerce("workers", document.get("workers", RUN_DEFAULTS["workers"].default), 0)
        except InvalidConfigError as e:
            fail(e.message, ("workers",))
        return cls(kind=kind, ensemble=ensemble, params=params, out=out, workers=workers)


def apply_overrides(document: dict, overrides: Dict[str, Any]) -> dict:
    """
    Merge flat flag overrides into a config document.

    Keys ``N``, ``L``, ``seed`` go to the ensemble block, ``density_kind``, ``density_mean`` and
    ``density_scale`` to the density block, ``out`` and ``workers`` to the top level, anything else
    to ``params``. ``None`` values are skipped.
    """
    merged = {
        **document,
        "ensemble": {**document.get("ensemble", {}), "density": dict(document.get("ensemble", {}).get("density", {}))},
        "params": dict(document.get("params", {})),
    }
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ("N", "L", "seed"):
            merged["ensemble"][key] = value
        elif key.startswith("density_"):
            merged["ensemble"]["density"][key[len("density_") :]] = value
        elif key in ("out", "workers"):
            merged[key] = value
        else:
            merged["params"][key] = value
    return merged


def load_config(kind: Optional[str] = None, path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Build the config of one run from an optional file and flag overrides.

    :param kind: Experiment kind from the subcommand; must agree with a ``kind`` in the file.
    :param path: TOML file, or ``None`` for defaults only.
    :param overrides: Flat flag values, see :func:`apply_overrides`.
    """
    document, lines = ({}, {}) if path is None else read_config_file(path)
    file_kind = document.get("kind")
    if kind and file_kind and file_kind != kind:
        raise InvalidConfigError(f"config file is for '{file_kind}', not '{kind}'", line=lines.get(("kind",)), source=path)
    document = {**document, "kind": kind or file_kind}
    config = ExperimentConfig.from_dict(apply_overrides(document, overrides or {}), lines, path)
    logger.info("Loaded %s config (N=%d, L=%d, seed=%d) from %s", config.kind, config.ensemble.half_size, config.ensemble.bandwidth_half, config.master_seed, path or "defaults")
    return config
