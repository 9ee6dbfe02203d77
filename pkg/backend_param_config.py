# backend_param_config.py
"""
SimParams and the params-file reader/writer.

A params document is a list of `key = expression` lines:

    # defaults, with a slower manual repair
    manual_repair_time = 3*1440
    random_failure_rate = 0.01/(24*60)
    host_selection_policy = least_failures
    regeneration_period = none

    [sweep]
    parameter = recovery_time
    values = 10, 20, 30

Expressions allow numbers, + - * /, unary sign and parentheses. Nothing else
is evaluated. Lines after a `[sweep]` header are returned raw for the sweep
front ends (CLI / Streamlit) to interpret.
"""

import logging
import math
import re
from dataclasses import dataclass, field, fields, replace
from typing import Any, Optional

from backend_errors import ConfigError, ConfigParseError

logger = logging.getLogger(__name__)

MINUTES_PER_DAY = 24 * 60

HOST_SELECTION_POLICIES = ("first_fit", "random", "least_failures")
FAILURE_DISTRIBUTIONS = ("exponential",)


def _knob(default, kind: str, **extra):
    return field(default=default, metadata={"kind": kind, **extra})


@dataclass(frozen=True)
class SimParams:
    # failures
    random_failure_rate: float = _knob(0.01 / (24 * 60), "rate")
    systematic_rate_multiplier: float = _knob(5.0, "real")
    systematic_failure_fraction: float = _knob(0.15, "probability")
    # job
    recovery_time: float = _knob(20.0, "duration")
    job_size: int = _knob(4096, "positive_count")
    job_length: float = _knob(256.0 * MINUTES_PER_DAY, "positive_duration")
    warm_standbys: int = _knob(16, "count")
    host_selection_time: float = _knob(3.0, "duration")
    waiting_time: float = _knob(20.0, "duration")
    # pools
    working_pool_size: int = _knob(4160, "count")
    spare_pool_size: int = _knob(200, "count")
    # repairs
    auto_repair_probability: float = _knob(0.80, "probability")
    auto_fail_probability: float = _knob(0.40, "probability")
    manual_fail_probability: float = _knob(0.20, "probability")
    auto_repair_time: float = _knob(120.0, "positive_duration")
    manual_repair_time: float = _knob(2.0 * MINUTES_PER_DAY, "positive_duration")
    diagnosis_uncertainty: float = _knob(0.0, "probability")
    preemption_cost_per_server: float = _knob(0.0, "duration")
    # optional mechanisms
    regeneration_period: Optional[float] = _knob(None, "optional_duration")
    removal_threshold: Optional[int] = _knob(None, "optional_count")
    removal_window: Optional[float] = _knob(None, "optional_duration")
    host_selection_policy: str = _knob("first_fit", "choice", choices=HOST_SELECTION_POLICIES)
    failure_distribution: str = _knob("exponential", "choice", choices=FAILURE_DISTRIBUTIONS)
    # simulator control
    base_seed: int = _knob(0, "integer")
    replications: int = _knob(10, "positive_count")
    debug_checks: bool = _knob(False, "flag")

    @property
    def systematic_failure_rate(self) -> float:
        return self.systematic_rate_multiplier * self.random_failure_rate

    @property
    def total_servers(self) -> int:
        return self.working_pool_size + self.spare_pool_size

    def validate(self) -> "SimParams":
        for f in fields(self):
            _check_value(f.name, f.metadata, getattr(self, f.name))
        if self.total_servers < self.job_size:
            raise ConfigError(
                f"working_pool_size + spare_pool_size = {self.total_servers} < job_size = {self.job_size}: "
                "the job can never run"
            )
        if (self.removal_threshold is None) != (self.removal_window is None):
            raise ConfigError("removal_threshold and removal_window must be set together")
        return self

    def override(self, **changes) -> "SimParams":
        """Copy with some fields replaced, coerced and validated."""
        coerced = {}
        for key, value in changes.items():
            meta = PARAM_FIELDS.get(key)
            if meta is None:
                raise ConfigError(f"unknown parameter {key!r}")
            coerced[key] = coerce_value(key, meta, value)
        return replace(self, **coerced).validate()


PARAM_FIELDS: dict[str, dict] = {f.name: dict(f.metadata) for f in fields(SimParams)}
INTEGER_KINDS = {"count", "positive_count", "integer", "optional_count"}


def _check_value(name: str, meta, value) -> None:
    kind = meta["kind"]
    if kind == "choice":
        if value not in meta["choices"]:
            raise ConfigError(f"{name} must be one of {', '.join(meta['choices'])}, got {value!r}")
        return
    if kind == "flag":
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true or false")
        return
    if kind.startswith("optional_"):
        if value is None:
            return
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
            raise ConfigError(f"{name} must be > 0 when set, got {value!r}")
        if kind == "optional_count" and not isinstance(value, int):
            raise ConfigError(f"{name} must be a whole number, got {value!r}")
        return
    if isinstance(value, bool) or not isinstance(value, (int, float)) or math.isnan(value):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if math.isinf(value):
        raise ConfigError(f"{name} must be finite")
    if kind in INTEGER_KINDS and not isinstance(value, int):
        raise ConfigError(f"{name} must be a whole number, got {value!r}")
    if kind == "probability" and not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name} must be in [0, 1], got {value!r}")
    if kind in ("rate", "real", "duration", "count") and value < 0:
        raise ConfigError(f"{name} must be >= 0, got {value!r}")
    if kind in ("positive_duration", "positive_count") and value <= 0:
        raise ConfigError(f"{name} must be > 0, got {value!r}")


def coerce_value(name: str, meta, value):
    """Bring a number / string from a sweep or form to the field's type."""
    kind = meta["kind"]
    if isinstance(value, str):
        value = _parse_value(name, meta, value, line=0)
    if kind.startswith("optional_") and value is None:
        return None
    if kind == "flag":
        return bool(value)
    if kind == "choice":
        return str(value)
    if kind in INTEGER_KINDS:
        if isinstance(value, float):
            if not value.is_integer():
                raise ConfigError(f"{name} must be a whole number, got {value!r}")
            value = int(value)
        return int(value)
    return float(value)


# ─────────────────────────────────────────────────────────────
# Arithmetic expressions
# ─────────────────────────────────────────────────────────────
_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<op>[-+*/()]))"
)


def _tokenize(text: str, line: int, col0: int) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    stripped_end = len(text.rstrip())
    while pos < stripped_end:
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            bad = len(text) - len(text[pos:].lstrip())
            raise ConfigParseError(f"unexpected character {text[bad]!r}", line, col0 + bad + 1)
        col = col0 + m.start(m.lastgroup) + 1
        tokens.append((m.lastgroup, m.group(m.lastgroup), col))
        pos = m.end()
    return tokens


class _ExprParser:
    """expr := term (('+'|'-') term)* ; term := unary (('*'|'/') unary)* ; unary := ('+'|'-') unary | atom"""

    def __init__(self, text: str, line: int = 0, col0: int = 0):
        self.line = line
        self.end_col = col0 + len(text) + 1
        self.tokens = _tokenize(text, line, col0)
        self.i = 0

    def _peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def _error(self, msg: str, tok=None):
        col = tok[2] if tok else self.end_col
        raise ConfigParseError(msg, self.line, col)

    def parse(self):
        if not self.tokens:
            self._error("empty expression")
        value = self._expr()
        tok = self._peek()
        if tok is not None:
            self._error(f"unexpected {tok[1]!r}", tok)
        return value

    def _expr(self):
        value = self._term()
        while (tok := self._peek()) and tok[1] in "+-":
            self.i += 1
            rhs = self._term()
            value = value + rhs if tok[1] == "+" else value - rhs
        return value

    def _term(self):
        value = self._unary()
        while (tok := self._peek()) and tok[1] in "*/":
            self.i += 1
            rhs = self._unary()
            if tok[1] == "*":
                value = value * rhs
            else:
                if rhs == 0:
                    self._error("division by zero", tok)
                value = value / rhs
        return value

    def _unary(self):
        tok = self._peek()
        if tok and tok[1] in "+-":
            self.i += 1
            value = self._unary()
            return -value if tok[1] == "-" else value
        return self._atom()

    def _atom(self):
        tok = self._peek()
        if tok is None:
            self._error("expression ends too early")
        self.i += 1
        if tok[0] == "num":
            text = tok[1]
            if re.fullmatch(r"\d+", text):
                return int(text)
            return float(text)
        if tok[1] == "(":
            value = self._expr()
            close = self._peek()
            if close is None or close[1] != ")":
                self._error("missing ')'", close)
            self.i += 1
            return value
        self._error(f"unexpected {tok[1]!r}", tok)


def evaluate_expression(text: str, line: int = 0, col0: int = 0):
    """
    Evaluate pure arithmetic. "2*1440" -> 2880, "0.01/(24*60)" -> 6.94e-06.
    Raises ConfigParseError with the column of the offending token.
    """
    return _ExprParser(text, line, col0).parse()


_FLAG_WORDS = {"true": True, "yes": True, "on": True, "false": False, "no": False, "off": False}


def _parse_value(name: str, meta, raw: str, line: int, col0: int = 0):
    kind = meta["kind"]
    word = raw.strip()
    if kind == "choice":
        word = word.strip("'\"")
        if word not in meta["choices"]:
            raise ConfigError(f"{name} must be one of {', '.join(meta['choices'])}, got {word!r}")
        return word
    if kind == "flag":
        if word.lower() in _FLAG_WORDS:
            return _FLAG_WORDS[word.lower()]
        value = evaluate_expression(raw, line, col0)
        if value not in (0, 1):
            raise ConfigError(f"{name} must be true or false, got {word!r}")
        return bool(value)
    if kind.startswith("optional_") and word.lower() in ("none", ""):
        return None
    return evaluate_expression(raw, line, col0)


# ─────────────────────────────────────────────────────────────
# Documents
# ─────────────────────────────────────────────────────────────
_LINE_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=(.*)$")
_SECTION_RE = re.compile(r"^\s*\[\s*([A-Za-z_]+)\s*\]\s*$")


@dataclass
class ConfigDocument:
    params: SimParams
    sweep: dict[str, str]
    keys_set: tuple[str, ...] = ()


def parse_config_document(text: str) -> ConfigDocument:
    """
    1) Read `key = expression` lines up to an optional [sweep] header.
    2) Unspecified keys keep their defaults; the result is validated.
    3) [sweep] lines are returned unparsed.
    """
    values: dict[str, Any] = {}
    sweep: dict[str, str] = {}
    section = "params"

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0]
        if not line.strip():
            continue

        sec = _SECTION_RE.match(line)
        if sec:
            section = sec.group(1).lower()
            if section not in ("params", "sweep"):
                raise ConfigParseError(f"unknown section [{section}]", lineno, 1)
            continue

        m = _LINE_RE.match(line)
        if not m:
            raise ConfigParseError("expected 'key = value'", lineno, len(line) - len(line.lstrip()) + 1)
        key, rhs = m.group(1), m.group(2)

        if section == "sweep":
            sweep[key] = rhs.strip()
            continue

        meta = PARAM_FIELDS.get(key)
        if meta is None:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            logger.warning("line %d: %s set more than once, last value wins", lineno, key)
        parsed = _parse_value(key, meta, rhs, lineno, m.start(2))
        values[key] = coerce_value(key, meta, parsed)

    params = replace(SimParams(), **values).validate()
    return ConfigDocument(params=params, sweep=sweep, keys_set=tuple(values))


def parse_config(text: str) -> SimParams:
    return parse_config_document(text).params


def load_config(path: str) -> ConfigDocument:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_document(f.read())


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_params(params: SimParams) -> str:
    lines = ["# simulation parameters"]
    for f in fields(params):
        lines.append(f"{f.name} = {_format_value(getattr(params, f.name))}")
    return "\n".join(lines) + "\n"
