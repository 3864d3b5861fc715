"""Admissible phase/amplitude pairs (gamma, psi) and their dyadic structure.

A pair is evaluated on (0, 1].  Every family exposes two surfaces: plain
double values (``values``) and log-magnitudes with signs (``log_values``).
The second one never overflows and is what the assumption audits and the
gamma'' inversion run on; the exponential family builds its plain values
from it so that overflow only shows up in the quantity that really is out
of range.
"""
from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, InvalidParameter, OutOfRange, RangeOverflow

PhaseValues = namedtuple("PhaseValues", "gamma dgamma d2gamma d3gamma psi dpsi")

LOG2 = math.log(2.0)

# family codes shared with the compiled kernels
POWER, EXP, CUSTOM = 0, 1, 2


def _as_array(t):
    return np.asarray(t, dtype=float)


class PhasePair:
    """Base class.  Subclasses fill ``_log_values`` and optionally ``_values``.

    ``sign`` is +1 for the pair as constructed and -1 for its conjugate
    (gamma replaced by -gamma).  Amplitude quantities are unaffected.
    """

    family = "custom"
    code = CUSTOM
    sign = 1

    # -- evaluation -------------------------------------------------------
    def _log_values(self, t):  # pragma: no cover - abstract
        raise NotImplementedError

    def log_values(self, t):
        """Return ``(logs, signs)``, two PhaseValues of arrays.

        ``logs`` holds log|f| (``-inf`` where f == 0) for every quantity.
        """
        logs, signs = self._log_values(_as_array(t))
        if self.sign < 0:
            signs = signs._replace(
                gamma=-signs.gamma, dgamma=-signs.dgamma,
                d2gamma=-signs.d2gamma, d3gamma=-signs.d3gamma)
        return logs, signs

    def _values(self, t):
        logs, signs = self._log_values(t)
        with np.errstate(over="ignore"):
            return PhaseValues(*(s * np.exp(lg) for lg, s in zip(logs, signs)))

    def values(self, t) -> PhaseValues:
        """Plain values; entries that overflow come back as +-inf."""
        v = self._values(_as_array(t))
        if self.sign < 0:
            v = v._replace(gamma=-v.gamma, dgamma=-v.dgamma,
                           d2gamma=-v.d2gamma, d3gamma=-v.d3gamma)
        return v

    @property
    def gamma2_at_1(self) -> float:
        return float(self._values(np.array(1.0)).d2gamma)

    @property
    def log_gamma2_at_1(self) -> float:
        return float(self._log_values(np.array(1.0))[0].d2gamma)

    def log_gamma2(self, t):
        return self._log_values(_as_array(t))[0].d2gamma

    # -- amplitude weight t^-theta psi^-(1-theta) ---------------------------
    def log_weight(self, t, theta=0.0):
        t = _as_array(t)
        logs, _ = self._log_values(t)
        return -theta * np.log(t) - (1.0 - theta) * logs.psi

    def weight(self, t, theta=0.0):
        t = _as_array(t)
        logs, signs = self._log_values(t)
        lw = -theta * np.log(t) - (1.0 - theta) * logs.psi
        s = signs.psi if theta == 0.0 else 1.0
        with np.errstate(over="ignore"):
            return s * np.exp(lw)

    def dlog_weight(self, t, theta=0.0):
        """d/dt log w = -theta/t - (1-theta) psi'/psi."""
        t = _as_array(t)
        logs, signs = self._log_values(t)
        ratio = signs.dpsi * signs.psi * np.exp(logs.dpsi - logs.psi)
        return -theta / t - (1.0 - theta) * ratio

    def d2log_weight(self, t, theta=0.0):
        """d^2/dt^2 log w, by central differences of ``dlog_weight``."""
        t = _as_array(t)
        h = 1e-5 * t
        return (self.dlog_weight(t + h, theta) - self.dlog_weight(t - h, theta)) / (2.0 * h)

    # -- misc ---------------------------------------------------------------
    def conjugate(self) -> "PhasePair":
        """The pair with gamma replaced by -gamma."""
        import copy
        other = copy.copy(self)
        other.sign = -self.sign
        return other

    @property
    def base(self) -> "PhasePair":
        return self if self.sign > 0 else self.conjugate()

    @property
    def kernel_params(self):
        """(family code, p1, p2) for the compiled kernels; CUSTOM has none."""
        return (CUSTOM, 0.0, 0.0)

    def describe(self) -> dict:
        return {"family": self.family, "conjugated": self.sign < 0}


class PowerPhase(PhasePair):
    """gamma(t) = t^-beta, psi(t) = t^(alpha+1)."""

    family = "power"
    code = POWER

    def __init__(self, beta: float, alpha: float = 0.0):
        if not (beta > 0 and math.isfinite(beta)):
            raise InvalidParameter(f"beta must be positive, got {beta!r}")
        if not (alpha >= 0 and math.isfinite(alpha)):
            raise InvalidParameter(f"alpha must be nonnegative, got {alpha!r}")
        self.beta = float(beta)
        self.alpha = float(alpha)

    def _values(self, t):
        b, a = self.beta, self.alpha
        with np.errstate(over="ignore", divide="ignore"):
            return PhaseValues(
                t ** -b,
                -b * t ** (-b - 1.0),
                b * (b + 1.0) * t ** (-b - 2.0),
                -b * (b + 1.0) * (b + 2.0) * t ** (-b - 3.0),
                t ** (a + 1.0),
                (a + 1.0) * t ** a,
            )

    def _log_values(self, t):
        b, a = self.beta, self.alpha
        L = np.log(t)
        one = np.ones_like(L)
        logs = PhaseValues(
            -b * L,
            math.log(b) - (b + 1.0) * L,
            math.log(b * (b + 1.0)) - (b + 2.0) * L,
            math.log(b * (b + 1.0) * (b + 2.0)) - (b + 3.0) * L,
            (a + 1.0) * L,
            math.log(a + 1.0) + a * L,
        )
        return logs, PhaseValues(one, -one, one, -one, one, one)

    def weight(self, t, theta=0.0):
        t = _as_array(t)
        with np.errstate(over="ignore", divide="ignore"):
            return t ** (-theta - (self.alpha + 1.0) * (1.0 - theta))

    def dlog_weight(self, t, theta=0.0):
        return -(theta + (self.alpha + 1.0) * (1.0 - theta)) / _as_array(t)

    def d2log_weight(self, t, theta=0.0):
        t = _as_array(t)
        return (theta + (self.alpha + 1.0) * (1.0 - theta)) / (t * t)

    @property
    def kernel_params(self):
        return (POWER, self.beta, self.alpha)

    def describe(self):
        return {"family": "power", "beta": self.beta, "alpha": self.alpha,
                "conjugated": self.sign < 0}

    def __repr__(self):
        c = ", conjugated" if self.sign < 0 else ""
        return f"PowerPhase(beta={self.beta!r}, alpha={self.alpha!r}{c})"


class ExpPhase(PhasePair):
    """gamma(t) = exp(sigma_gamma/t), psi(t) = exp(-sigma_psi/t)."""

    family = "exp"
    code = EXP

    def __init__(self, sigma_gamma: float, sigma_psi: float):
        for name, v in (("sigma_gamma", sigma_gamma), ("sigma_psi", sigma_psi)):
            if not (v > 0 and math.isfinite(v)):
                raise InvalidParameter(f"{name} must be positive, got {v!r}")
        self.sigma_gamma = float(sigma_gamma)
        self.sigma_psi = float(sigma_psi)

    def _log_values(self, t):
        sg, sp = self.sigma_gamma, self.sigma_psi
        u = 1.0 / t
        e = sg * u
        one = np.ones_like(u)
        logs = PhaseValues(
            e,
            math.log(sg) + 2.0 * np.log(u) + e,
            np.log(sg * sg * u ** 4 + 2.0 * sg * u ** 3) + e,
            np.log(sg ** 3 * u ** 6 + 6.0 * sg * sg * u ** 5 + 6.0 * sg * u ** 4) + e,
            -sp * u,
            math.log(sp) + 2.0 * np.log(u) - sp * u,
        )
        return logs, PhaseValues(one, -one, one, -one, one, one)

    def dlog_weight(self, t, theta=0.0):
        t = _as_array(t)
        return -theta / t - (1.0 - theta) * self.sigma_psi / (t * t)

    def d2log_weight(self, t, theta=0.0):
        t = _as_array(t)
        return theta / (t * t) + 2.0 * (1.0 - theta) * self.sigma_psi / t ** 3

    @property
    def kernel_params(self):
        return (EXP, self.sigma_gamma, self.sigma_psi)

    def describe(self):
        return {"family": "exp", "sigma_gamma": self.sigma_gamma,
                "sigma_psi": self.sigma_psi, "conjugated": self.sign < 0}

    def __repr__(self):
        c = ", conjugated" if self.sign < 0 else ""
        return f"ExpPhase(sigma_gamma={self.sigma_gamma!r}, sigma_psi={self.sigma_psi!r}{c})"


class CustomPhase(PhasePair):
    """User supplied vectorized evaluators.

    The constructor samples gamma'' on a log grid and rejects pairs that are
    not strictly positive and decreasing there.
    """

    family = "custom"
    code = CUSTOM

    def __init__(self, gamma: Callable, dgamma: Callable, d2gamma: Callable,
                 d3gamma: Callable, psi: Callable, dpsi: Callable,
                 *, check_grid=None):
        self._fns = PhaseValues(gamma, dgamma, d2gamma, d3gamma, psi, dpsi)
        t = np.geomspace(1e-3, 1.0, 128) if check_grid is None else _as_array(check_grid)
        g2 = np.asarray(d2gamma(t), dtype=float)
        if not np.all(g2 > 0):
            raise DomainError("gamma'' must be strictly positive on (0, 1]")
        if not np.all(np.diff(g2) < 0):
            raise DomainError("gamma'' must be strictly decreasing on (0, 1]")

    def _values(self, t):
        with np.errstate(all="ignore"):
            return PhaseValues(*(np.asarray(f(t), dtype=float) * np.ones_like(t)
                                 for f in self._fns))

    def _log_values(self, t):
        v = self._values(t)
        with np.errstate(divide="ignore"):
            logs = PhaseValues(*(np.log(np.abs(x)) for x in v))
        return logs, PhaseValues(*(np.sign(x) for x in v))


def make_power_phase(beta: float, alpha: float = 0.0) -> PowerPhase:
    return PowerPhase(beta, alpha)


def make_exp_phase(sigma_gamma: float, sigma_psi: float) -> ExpPhase:
    return ExpPhase(sigma_gamma, sigma_psi)


def phase_from_mapping(cfg: Mapping) -> PhasePair:
    """Build a pair from config keys family/beta/alpha/sigma_gamma/sigma_psi."""
    family = str(cfg.get("family", "")).lower()
    try:
        if family == "power":
            return PowerPhase(float(cfg["beta"]), float(cfg.get("alpha", 0.0)))
        if family == "exp":
            return ExpPhase(float(cfg["sigma_gamma"]), float(cfg["sigma_psi"]))
    except KeyError as exc:
        raise InvalidParameter(f"phase spec for family {family!r} is missing key {exc.args[0]!r}")
    raise InvalidParameter(f"unknown phase family {family!r} (expected 'power' or 'exp')")


def eval_phase(p: PhasePair, t: float) -> PhaseValues:
    """All six quantities at one point of (0, 1] as Python floats."""
    t = float(t)
    if not (0.0 < t <= 1.0):
        raise DomainError(f"t={t!r} is outside (0, 1]")
    v = p.values(t)
    out = []
    for name, x in zip(PhaseValues._fields, v):
        x = float(x)
        if not math.isfinite(x):
            raise RangeOverflow(f"{name}({t!r}) is not representable")
        out.append(x)
    return PhaseValues(*out)


# -- inversion of gamma'' -----------------------------------------------------

def invert_log_gamma2(p: PhasePair, log_s: float) -> float:
    """Solve log gamma''(t) = log_s for t in (0, 1]."""
    base_log = p.log_gamma2_at_1
    if log_s < base_log:
        if log_s >= base_log - 1e-14 * max(1.0, abs(base_log)):
            return 1.0
        raise OutOfRange(f"level exp({log_s!r}) is below gamma''(1); t would exceed 1")
    if log_s == base_log:
        return 1.0

    def f(t):
        return float(p.log_gamma2(t)) - log_s

    hi = 1.0
    lo = 0.5
    while f(lo) < 0.0:
        hi = lo
        lo *= 0.5
        if lo < 1e-300:
            raise RangeOverflow(f"gamma'' never reaches exp({log_s!r}) above t=1e-300")
    t = brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    # polish to the best neighbouring double
    best, best_err = t, abs(f(t))
    for cand in (np.nextafter(t, 0.0), np.nextafter(t, 2.0)):
        if 0.0 < cand <= 1.0:
            e = abs(f(cand))
            if e < best_err:
                best, best_err = float(cand), e
    return best


def invert_gamma2(p: PhasePair, s: float) -> float:
    """t in (0, 1] with gamma''(t) = s; requires s >= gamma''(1)."""
    if not s > 0:
        raise OutOfRange(f"level {s!r} must be positive")
    return invert_log_gamma2(p, math.log(s))


def dyadic_level(p: PhasePair, t):
    """Index l with t_{l+1} < t <= t_l, i.e. floor(log2(gamma''(t)/gamma''(1)))."""
    r = (np.asarray(p.log_gamma2(t)) - p.log_gamma2_at_1) / LOG2
    return np.floor(r + 1e-12).astype(int)


@dataclass(frozen=True)
class DyadicGrid:
    """Breakpoints t_j = (gamma'')^-1(gamma''(1) 2^j), j = 0..j_max."""

    j_max: int
    log_levels: np.ndarray
    breakpoints: np.ndarray
    truncated: bool = False

    @property
    def levels(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_levels)

    def cell(self, j: int) -> tuple[float, float]:
        """The j-th cell [t_{j+1}, t_j]."""
        if not 0 <= j < len(self.breakpoints) - 1:
            raise IndexError(f"cell {j} is outside the grid (j_max={self.j_max})")
        return float(self.breakpoints[j + 1]), float(self.breakpoints[j])

    def __len__(self):
        return len(self.breakpoints)


def dyadic_grid(p: PhasePair, j_max: int) -> DyadicGrid:
    if j_max < 0:
        raise InvalidParameter("j_max must be nonnegative")
    base = p.log_gamma2_at_1
    logs, ts = [], []
    truncated = False
    for j in range(j_max + 1):
        ls = base + j * LOG2
        try:
            t = 1.0 if j == 0 else invert_log_gamma2(p, ls)
        except RangeOverflow:
            truncated = True
            break
        logs.append(ls)
        ts.append(t)
    return DyadicGrid(len(ts) - 1, np.array(logs), np.array(ts), truncated)


@dataclass(frozen=True)
class GridSpec:
    """Log-spaced sample grid on [t_min, t_max] used by the audits."""

    t_min: float = 1e-8
    t_max: float = 1.0
    n: int = 512

    def __post_init__(self):
        if not (0 < self.t_min < self.t_max <= 1.0):
            raise InvalidParameter("need 0 < t_min < t_max <= 1")
        if self.n < 2:
            raise InvalidParameter("grid needs at least two samples")

    def points(self) -> np.ndarray:
        return np.geomspace(self.t_min, self.t_max, self.n)

    @property
    def decades(self) -> float:
        return math.log10(self.t_max / self.t_min)

    def to_dict(self):
        return {"t_min": self.t_min, "t_max": self.t_max, "n": self.n, "law": "log"}
