"""Typed, sectioned ``key = value`` experiment configuration.

Every key has a declared type and default.  Parsing rejects unknown sections
and keys, and ``dumps`` writes every resolved value, so a saved configuration
always reproduces the run it came from.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from typing import Any, Callable

KINDS = ("deviation", "regression", "slln", "baum-katz", "weighted", "operators", "oracle")


class ConfigError(ValueError):
    """Malformed configuration; the CLI maps this to exit status 2."""


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_float_list(text: str) -> tuple[float, ...]:
    text = text.strip()
    return tuple(float(v) for v in text.split(",")) if text else ()


def _parse_int_list(text: str) -> tuple[int, ...]:
    text = text.strip()
    return tuple(int(v) for v in text.split(",")) if text else ()


def _parse_str_list(text: str) -> tuple[str, ...]:
    text = text.strip()
    return tuple(v.strip() for v in text.split(",")) if text else ()


def _optional_str(text: str) -> str | None:
    text = text.strip()
    return None if text.lower() in ("", "none") else text


def _fmt_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_fmt_value(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    help: str


SCHEMA: dict[str, dict[str, Key]] = {
    "experiment": {
        "kind": Key(str, "oracle", "one of " + ", ".join(KINDS)),
        "seed": Key(int, 0, "master seed for every random stream"),
        "output": Key(str, "results", "directory for report.json, CSVs and SVGs"),
    },
    "generator": {
        "kinds": Key(_parse_str_list, ("iid",), "field constructions: iid, modulated, tensor"),
        "laws": Key(_parse_str_list, ("rademacher",), "innovation laws"),
        "modulation": Key(_optional_str, None, "sign, scale or none"),
    },
    "field": {
        "dims": Key(_parse_int_list, (2,), "lattice dimensions to run"),
        "side": Key(int, 32, "window side N, so the window is N^d"),
    },
    "exponents": {
        "p": Key(float, 2.0, "moment exponent"),
        "q": Key(float, 3.0, "lower kernel exponent"),
        "r": Key(float, 2.0, "smoothness exponent"),
        "s": Key(float, 3.0, "higher moment exponent"),
        "alphas": Key(_parse_float_list, (0.75, 0.9), "Baum-Katz exponents alpha"),
        "gamma": Key(float, 0.25, "radius exponent for weighted sums"),
    },
    "budget": {
        "trials": Key(int, 10_000, "Monte Carlo trials per check"),
        "cap": Key(int, 6, "largest dyadic exponent per coordinate"),
        "n_max": Key(int, 32, "number of weighted-sum terms"),
        "eps": Key(float, 1.0, "threshold scale"),
        "decay_target": Key(float, 0.1, "required median final/initial sup ratio"),
        "stability": Key(float, 0.05, "allowed share of the final quarter of a series"),
    },
    "checks": {
        "mode": Key(str, "mc", "mc or exact"),
        "dominated": Key(_parse_bool, False, "also run the dominated-variable form"),
        "tolerance": Key(float, 1e-6, "relative tolerance of quadrature checks"),
    },
    "regression": {
        "n": Key(int, 64, "design points per axis"),
        "bandwidth_exponent": Key(float, 0.5, "h = n^-exponent"),
        "kernel": Key(str, "box", "box or plateau"),
        "slope": Key(float, 0.0, "plateau kernel slope"),
        "function": Key(str, "zero", "regression function: zero, linear, kinked"),
    },
}


# Keys whose default depends on the experiment kind; applied before file values.
KIND_DEFAULTS: dict[str, dict[tuple[str, str], Any]] = {
    "deviation": {},
    "regression": {("field", "dims"): (1,), ("budget", "trials"): 2000},
    "slln": {("exponents", "p"): 1.5, ("budget", "trials"): 1000},
    "baum-katz": {("field", "dims"): (1, 2), ("budget", "trials"): 1000},
    "weighted": {("exponents", "p"): 1.5, ("budget", "trials"): 1000},
    "operators": {},
    "oracle": {("field", "dims"): (2, 3)},
}


@dataclass
class ExperimentConfig:
    values: dict[tuple[str, str], Any] = field(default_factory=dict)

    def __getitem__(self, key: str):
        section, name = key.split(".", 1)
        return self.values[(section, name)]

    @property
    def kind(self) -> str:
        return self["experiment.kind"]

    def to_dict(self) -> dict:
        out: dict[str, dict] = {}
        for (section, name), value in self.values.items():
            out.setdefault(section, {})[name] = list(value) if isinstance(value, tuple) else value
        return out

    def dumps(self) -> str:
        lines = []
        for section, keys in SCHEMA.items():
            lines.append(f"[{section}]")
            for name in keys:
                lines.append(f"{name} = {_fmt_value(self.values[(section, name)])}")
            lines.append("")
        return "\n".join(lines)


def _split_key(dotted: str) -> tuple[str, str]:
    if "." not in dotted:
        raise ConfigError(f"override {dotted!r} must look like section.key=value")
    section, name = dotted.split(".", 1)
    return section.strip(), name.strip()


def _convert(section: str, name: str, raw: str):
    if section not in SCHEMA:
        raise ConfigError(f"unknown section [{section}]")
    if name not in SCHEMA[section]:
        raise ConfigError(f"unknown key {section}.{name}")
    try:
        return SCHEMA[section][name].parse(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {section}.{name}: {exc}") from None


def loads(text: str, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Parse configuration text, then apply ``section.key -> raw value`` overrides."""
    parser = configparser.ConfigParser(interpolation=None, strict=True, default_section="__none__", inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0]) from None
    raw: dict[tuple[str, str], str] = {}
    for section in parser.sections():
        for name, value in parser.items(section):
            _convert(section, name, value)
            raw[(section, name)] = value
    for dotted, value in (overrides or {}).items():
        section, name = _split_key(dotted)
        _convert(section, name, value)
        raw[(section, name)] = value
    kind = _convert("experiment", "kind", raw.get(("experiment", "kind"), SCHEMA["experiment"]["kind"].default))
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    values = {(s, n): key.default for s, keys in SCHEMA.items() for n, key in keys.items()}
    values.update(KIND_DEFAULTS[kind])
    for (section, name), value in raw.items():
        values[(section, name)] = _convert(section, name, value)
    config = ExperimentConfig(values)
    validate(config)
    return config


def load(path, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    try:
        with open(path) as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text, overrides)


def validate(config: ExperimentConfig) -> None:
    """Domain checks that do not need any computation."""
    from .bounds import BoundParams
    from .field_lab import GeneratorSpec

    problems = []
    if any(d < 1 for d in config["field.dims"]) or not config["field.dims"]:
        problems.append("field.dims must list positive integers")
    if config["field.side"] < 1:
        problems.append("field.side must be positive")
    for key in ("budget.trials", "budget.n_max"):
        if config[key] < 1:
            problems.append(f"{key} must be positive")
    if config["budget.cap"] < 0:
        problems.append("budget.cap must be nonnegative")
    if config["checks.mode"] not in ("mc", "exact"):
        problems.append("checks.mode must be mc or exact")
    if config["regression.kernel"] not in ("box", "plateau"):
        problems.append("regression.kernel must be box or plateau")
    if config["regression.function"] not in ("zero", "linear", "kinked"):
        problems.append("regression.function must be zero, linear or kinked")
    try:
        for kind in config["generator.kinds"]:
            for law in config["generator.laws"]:
                modulation = config["generator.modulation"] if kind != "iid" else None
                GeneratorSpec(kind, law, modulation, config["experiment.seed"])
    except ValueError as exc:
        problems.append(f"generator: {exc}")
    if config.kind == "regression" and set(config["generator.kinds"]) != {"iid"}:
        problems.append("regression noise must use generator.kinds = iid")
    if config.kind == "deviation":
        try:
            for d in config["field.dims"]:
                BoundParams(config["exponents.p"], config["exponents.q"], d)
        except ValueError as exc:
            problems.append(f"exponents: {exc}")
    if problems:
        raise ConfigError("; ".join(problems))
