"""Run configuration: a small TOML file, one file per run.

Example::

    command = "scan"
    seed = 0

    [phase]
    family = "power"
    beta = 3.0
    alpha = 1.0

    [operator]
    k = 2
    theta = 0.0

    [scan]
    xi = [-1e4, 1e4]
    eta = [-1e4, 1e4]
    n = 200
    refinements = 2
    extend = 1
    tol = 1e-5
"""
from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import InvalidParameter

COMMANDS = ("check", "scan", "sharpness", "lp", "apply", "converge")

# section -> {key: (kind, default)}; kind is a validator name below
SCHEMA = {
    "": {"command": ("command", None), "seed": ("int", 0), "out": ("str", None),
         "tol": ("pos", None), "threads": ("posint", None)},
    "phase": {"family": ("str", None), "beta": ("pos", None), "alpha": ("nonneg", 0.0),
              "sigma_gamma": ("pos", None), "sigma_psi": ("pos", None)},
    "operator": {"k": ("posint", 2), "theta": ("unit", 0.0)},
    "check": {"t_min": ("pos", None), "n": ("posint", None)},
    "scan": {"xi": ("range", (-1e4, 1e4)), "eta": ("range", (-1e4, 1e4)),
             "n": ("posint", 200), "n_xi": ("posint", None), "n_eta": ("posint", None),
             "law": ("str", "two-sided-log"), "min_abs": ("pos", 1e-2),
             "refinements": ("nonnegint", 2), "extend": ("nonnegint", 1),
             "tol": ("pos", 1e-5), "cap": ("pos", 1.0), "stability": ("pos", 0.05)},
    "sharpness": {"t_list": ("floats", None), "count": ("posint", 6), "tol": ("pos", 1e-6)},
    "lp": {"js": ("ints", None), "j_max": ("nonnegint", 10), "taus": ("floats", (0.0, 0.25)),
           "J": ("posint", 400), "tol": ("pos", 1e-8), "stability": ("pos", 4.0)},
    "apply": {"n": ("posint", 64), "length": ("pos", 4.0), "eps": ("open_unit", 0.2),
              "field": ("str", "gaussian"), "width": ("pos", 0.25), "kmax": ("posint", 6),
              "path": ("str", None), "tol": ("pos", 1e-8), "method": ("str", "both"),
              "agreement": ("pos", 0.05)},
    "converge": {"point": ("floats", (0.3, 0.2)), "eps0": ("open_unit", 0.5),
                 "steps": ("posint", 6), "width": ("pos", 0.25), "tol": ("pos", 1e-11)},
}


class ConfigError(InvalidParameter):
    """A config problem with the offending field and, when known, its line."""

    def __init__(self, message, key=None, line=None):
        where = ""
        if line is not None:
            where = f"line {line}: "
        if key:
            where += f"field '{key}': "
        super().__init__(where + message)
        self.key = key
        self.line = line


@dataclass
class RunConfig:
    command: str
    phase: dict
    k: int = 2
    theta: float = 0.0
    seed: int = 0
    out: str | None = None
    threads: int | None = None
    tol: float | None = None
    sections: dict = field(default_factory=dict)
    source: str = ""

    def section(self, name: str) -> dict:
        """Section values with defaults filled in."""
        out = {k: v[1] for k, v in SCHEMA[name].items()}
        out.update(self.sections.get(name, {}))
        return out


def _line_of(text: str, section: str, key: str):
    """Best-effort line number of ``key`` inside ``[section]``."""
    current = ""
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            current = m.group(1).strip()
            continue
        if current == section and pat.match(line):
            return i
    return None


def _number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check(kind, v):
    """Return the normalized value or raise ValueError with a reason."""
    if kind in ("str", "command"):
        if not isinstance(v, str):
            raise ValueError("expected a string")
        if kind == "command" and v not in COMMANDS:
            raise ValueError(f"unknown command {v!r} (expected one of {', '.join(COMMANDS)})")
        return v
    if kind in ("int", "posint", "nonnegint"):
        if not isinstance(v, int) or isinstance(v, bool):
            raise ValueError("expected an integer")
        if kind == "posint" and v < 1:
            raise ValueError("must be >= 1")
        if kind == "nonnegint" and v < 0:
            raise ValueError("must be >= 0")
        return v
    if kind in ("pos", "nonneg", "unit", "open_unit"):
        if not _number(v) or not math.isfinite(v):
            raise ValueError("expected a finite number")
        v = float(v)
        if kind == "pos" and v <= 0:
            raise ValueError("must be > 0")
        if kind == "nonneg" and v < 0:
            raise ValueError("must be >= 0")
        if kind == "unit" and not (0.0 <= v < 1.0):
            raise ValueError("must lie in [0, 1)")
        if kind == "open_unit" and not (0.0 < v < 1.0):
            raise ValueError("must lie in (0, 1)")
        return v
    if kind == "range":
        if not (isinstance(v, list) and len(v) == 2 and all(_number(x) for x in v)):
            raise ValueError("expected [lo, hi]")
        lo, hi = float(v[0]), float(v[1])
        if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
            raise ValueError(f"empty range [{lo!r}, {hi!r}]")
        return (lo, hi)
    if kind in ("floats", "ints"):
        if not isinstance(v, list) or not v:
            raise ValueError("expected a non-empty array")
        if kind == "ints":
            if not all(isinstance(x, int) and not isinstance(x, bool) and x >= 0 for x in v):
                raise ValueError("expected nonnegative integers")
            return tuple(v)
        if not all(_number(x) and math.isfinite(x) for x in v):
            raise ValueError("expected finite numbers")
        return tuple(float(x) for x in v)
    raise AssertionError(kind)


def parse_config(text: str, command: str | None = None) -> RunConfig:
    """Parse and validate; every problem raises ConfigError naming the field."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"syntax error: {exc}", line=getattr(exc, "lineno", None)) from None
    values = {}
    for name, body in raw.items():
        if isinstance(body, dict):
            if name not in SCHEMA or name == "":
                raise ConfigError(f"unknown section [{name}]", line=_line_of(text, "", f"[{name}"))
            section, items = name, body
        else:
            section, items = "", {name: body}
        schema = SCHEMA[section]
        dest = values.setdefault(section, {})
        for key, v in items.items():
            label = f"{section}.{key}" if section else key
            if key not in schema:
                raise ConfigError("unknown field", label, _line_of(text, section, key))
            try:
                dest[key] = _check(schema[key][0], v)
            except ValueError as exc:
                raise ConfigError(str(exc), label, _line_of(text, section, key)) from None

    top = values.get("", {})
    cmd = top.get("command")
    if command is not None:
        if cmd is not None and cmd != command:
            raise ConfigError(f"config is for {cmd!r} but the command line asked for {command!r}",
                              "command", _line_of(text, "", "command"))
        cmd = command
    if cmd is None:
        raise ConfigError("no command given", "command")
    phase = values.get("phase", {})
    if "family" not in phase:
        raise ConfigError("missing phase family", "phase.family")
    if phase["family"] not in ("power", "exp"):
        raise ConfigError(f"unknown family {phase['family']!r}", "phase.family",
                          _line_of(text, "phase", "family"))
    needed = ("beta",) if phase["family"] == "power" else ("sigma_gamma", "sigma_psi")
    for key in needed:
        if key not in phase:
            raise ConfigError("missing for this family", f"phase.{key}")
    op = values.get("operator", {})
    sections = {k: v for k, v in values.items() if k not in ("", "phase", "operator")}
    scan = sections.get("scan", {})
    if scan.get("law", "two-sided-log") not in ("lin", "log", "two-sided-log"):
        raise ConfigError(f"unknown grid law {scan['law']!r}", "scan.law",
                          _line_of(text, "scan", "law"))
    app = sections.get("apply", {})
    if app.get("field", "gaussian") not in ("gaussian", "band", "file"):
        raise ConfigError(f"unknown field kind {app['field']!r}", "apply.field",
                          _line_of(text, "apply", "field"))
    if app.get("field") == "file" and not app.get("path"):
        raise ConfigError("field = 'file' needs a path", "apply.path")
    if app.get("method", "both") not in ("both", "direct", "spectral"):
        raise ConfigError(f"unknown method {app['method']!r}", "apply.method",
                          _line_of(text, "apply", "method"))
    conv = sections.get("converge", {})
    if "point" in conv and len(conv["point"]) != 2:
        raise ConfigError("expected [x, y]", "converge.point", _line_of(text, "converge", "point"))
    return RunConfig(cmd, phase, op.get("k", 2), op.get("theta", 0.0), top.get("seed", 0),
                     top.get("out"), top.get("threads"), top.get("tol"), sections, text)


def load_config(path, command: str | None = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}") from None
    return parse_config(text, command)
