"""Dyadic pieces T_j of the theta-weighted operator and their norm surrogates.

T_j keeps the kernel on the cell [t_{j+1}, t_j].  Its L1 norm is the kernel
mass int_cell t^-theta psi^-(1-theta); its L2 norm is sup |m_j| over a
frequency region.  Both are compared with the bounds

    l1_bound = t_j^(1-theta) |gamma'''(t_j)|^((1-theta)/3)
    l2_bound = 1 / (t_j^theta |gamma'''(t_j)|^(theta/3))

and interpolated: ||T_j||_p <= l1^tau l2^(1-tau) with 1/p = (1+tau)/2.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize

from .errors import InvalidParameter, RangeOverflow
from .multiplier import breakpoint, compute_mj, fmt
from .oscquad import FrequencyPoint, OperatorSpec
from .phase import PhasePair


@dataclass
class DyadicPieceReport:
    j: int
    cell: tuple
    l1_measured: float = math.nan
    l1_bound: float = math.nan
    l2_measured: float = math.nan
    l2_bound: float = math.nan
    l2_argmax: tuple | None = None
    l2_evaluations: int = 0
    l2_failures: int = 0
    flagged: bool = False

    @property
    def l1_ratio(self) -> float:
        return self.l1_measured / self.l1_bound

    @property
    def l2_ratio(self) -> float:
        return self.l2_measured / self.l2_bound

    def to_dict(self):
        d = asdict(self)
        d["l1_ratio"], d["l2_ratio"] = self.l1_ratio, self.l2_ratio
        return d


def _log_x(p: PhasePair, t: float) -> float:
    """log(t |gamma'''(t)|^(1/3))."""
    logs, _ = p.log_values(t)
    return math.log(t) + float(logs.d3gamma) / 3.0


def _check_theta(theta):
    if not (0.0 <= theta < 1.0):
        raise InvalidParameter(f"theta must lie in [0, 1), got {theta!r}")


def l1_bound(p: PhasePair, theta: float, j: int) -> float:
    return math.exp((1.0 - theta) * _log_x(p, breakpoint(p, j)))


def l2_bound(p: PhasePair, theta: float, j: int) -> float:
    return math.exp(-theta * _log_x(p, breakpoint(p, j)))


def tj_l1_bound(p: PhasePair, theta: float, j: int) -> DyadicPieceReport:
    """Kernel mass of the j-th cell against its bound."""
    _check_theta(theta)
    p = p.base
    lo, hi = breakpoint(p, j + 1), breakpoint(p, j)
    rep = DyadicPieceReport(j, (lo, hi))
    # integrate w / w(lo) so that large weights at deep levels stay representable
    lw0 = float(p.log_weight(lo, theta))
    val, _ = quad(lambda t: math.exp(float(p.log_weight(t, theta)) - lw0), lo, hi,
                  epsabs=0.0, epsrel=1e-12, limit=200)
    with np.errstate(over="ignore"):
        rep.l1_measured = float(val * math.exp(lw0)) if lw0 < 700 else math.inf
    rep.l1_bound = l1_bound(p, theta, j)
    rep.flagged = not (math.isfinite(rep.l1_measured) and math.isfinite(rep.l1_bound))
    return rep


def l2_region(p: PhasePair, k: int, j: int):
    """(xi_max, eta_max): |eta| <= 4 gamma''(t_{j+1})/(k(k-1)), |xi| <= 4 |gamma'(t_{j+1})|."""
    v = p.base.values(breakpoint(p.base, j + 1))
    xi_max = 4.0 * abs(float(v.dgamma))
    eta_max = 4.0 * float(v.d2gamma) / (k * (k - 1)) if k >= 2 else 0.0
    if not (math.isfinite(xi_max) and math.isfinite(eta_max)):
        raise RangeOverflow(f"scan region for level {j} is not representable")
    return xi_max, eta_max


def _ridge(p: PhasePair, k: int, lo: float, hi: float, n: int = 9):
    """Frequencies making t stationary to second order (first order for k = 1)."""
    out = []
    for t in np.linspace(lo, hi, n):
        v = p.base.values(t)
        if k >= 2:
            eta = float(v.d2gamma) / (k * (k - 1) * t ** (k - 2))
        else:
            eta = 0.0
        xi = float(v.dgamma) - eta * k * t ** (k - 1)
        out.append((xi, eta))
        out.append((float(v.dgamma), 0.0))
    return out


def _signed_log_grid(m, n):
    if m <= 0:
        return np.zeros(1)
    mag = np.geomspace(max(m * 1e-4, 1e-3), m, n)
    return np.concatenate([-mag[::-1], [0.0], mag])


def tj_l2_sup(p: PhasePair, theta: float, j: int, k: int = 2, region=None, tol: float = 1e-8,
              n_grid: int = 10, polish: int = 4) -> DyadicPieceReport:
    """sup |m_j| from ridge seeds, a coarse two-sided log grid and a local polish.

    ``region`` is ``(xi_max, eta_max)``; by default it is sized from level j+1.
    For k = 1 the multiplier only depends on xi + eta, so eta is fixed at 0.
    """
    _check_theta(theta)
    spec = OperatorSpec(k, theta)
    lo, hi = breakpoint(p.base, j + 1), breakpoint(p.base, j)
    rep = DyadicPieceReport(j, (lo, hi))
    xi_max, eta_max = region if region is not None else l2_region(p, k, j)
    if k == 1:
        eta_max = 0.0
    cache = {}

    def value(x, y):
        key = (float(x), float(y))
        if key not in cache:
            try:
                r = compute_mj(p, spec, j, FrequencyPoint(*key), tol)
                cache[key] = abs(r.value) if r.converged else math.nan
            except (ArithmeticError, ValueError):
                cache[key] = math.nan
        return cache[key]

    seeds = [(x, y) for x, y in _ridge(p, k, lo, hi)
             if abs(x) <= xi_max * (1 + 1e-12) and abs(y) <= eta_max * (1 + 1e-12)]
    gx = _signed_log_grid(xi_max, n_grid)
    gy = _signed_log_grid(eta_max, n_grid) if k >= 2 else np.zeros(1)
    seeds += [(x, y) for x in gx for y in gy]
    vals = np.array([value(x, y) for x, y in seeds])
    order = np.argsort(np.where(np.isnan(vals), -np.inf, -vals))
    sx = max(xi_max, 1.0) * 1e-3
    sy = max(eta_max, 1.0) * 1e-3
    for i in order[:polish]:
        x0, y0 = seeds[i]

        def neg(z, x0=x0, y0=y0):
            x = float(np.clip(x0 + z[0] * sx, -xi_max, xi_max))
            y = float(np.clip(y0 + z[1] * sy, -eta_max, eta_max)) if k >= 2 else 0.0
            v = value(x, y)
            return -v if math.isfinite(v) else 0.0

        minimize(neg, np.zeros(2), method="Nelder-Mead",
                 options={"xatol": 1e-3, "fatol": 1e-12 + tol, "maxfev": 80,
                          "initial_simplex": [[0, 0], [1, 0], [0, 1]]})
    good = {k_: v for k_, v in cache.items() if math.isfinite(v)}
    rep.l2_evaluations = len(cache)
    rep.l2_failures = len(cache) - len(good)
    if good:
        arg = max(good, key=good.get)
        rep.l2_measured, rep.l2_argmax = good[arg], arg
    rep.l2_bound = l2_bound(p.base, theta, j)
    rep.flagged = not good
    return rep


def piece_reports(p: PhasePair, theta: float, js, k: int = 2, tol: float = 1e-8):
    """L1 and L2 parts together for each level in ``js``."""
    out = []
    for j in js:
        a = tj_l1_bound(p, theta, j)
        b = tj_l2_sup(p, theta, j, k=k, tol=tol)
        a.l2_measured, a.l2_bound, a.l2_argmax = b.l2_measured, b.l2_bound, b.l2_argmax
        a.l2_evaluations, a.l2_failures = b.l2_evaluations, b.l2_failures
        a.flagged = a.flagged or b.flagged
        out.append(a)
    return out


def pieces_csv(reports) -> str:
    buf = io.StringIO()
    buf.write("j,l1_measured,l1_bound,l2_measured,l2_bound\n")
    for r in reports:
        buf.write(f"{r.j},{fmt(r.l1_measured)},{fmt(r.l1_bound)},"
                  f"{fmt(r.l2_measured)},{fmt(r.l2_bound)}\n")
    return buf.getvalue()


# -- interpolation bookkeeping ---------------------------------------------------

CAUCHY_FRACTION = 0.01


@dataclass
class InterpolationSpec:
    theta: float
    tau: float
    one_over_p: float
    p: float
    terms: np.ndarray = field(repr=False)
    partial_sums: np.ndarray = field(repr=False)
    cauchy: bool = False
    expected_convergent: bool = False

    def to_dict(self):
        return {"theta": self.theta, "tau": self.tau, "one_over_p": self.one_over_p,
                "p": self.p, "J": int(self.terms.size - 1),
                "total": float(self.partial_sums[-1]),
                "last_quarter_increment": last_quarter_increment(self.partial_sums),
                "cauchy": self.cauchy, "expected_convergent": self.expected_convergent}


def last_quarter_increment(s) -> float:
    """(S_J - S_{3J/4}) / S_J."""
    s = np.asarray(s)
    q = (3 * (s.size - 1)) // 4
    return float((s[-1] - s[q]) / s[-1])


def interpolation_table(p: PhasePair, theta: float, taus, J: int = 400) -> list:
    """Per-tau series of interpolated bounds l1_bound^tau l2_bound^(1-tau), j = 0..J."""
    _check_theta(theta)
    if J < 4:
        raise InvalidParameter("J must be at least 4")
    p = p.base
    logx = np.array([_log_x(p, breakpoint(p, j)) for j in range(J + 1)])
    out = []
    for tau in taus:
        tau = float(tau)
        if not (0.0 <= tau <= 1.0):
            raise InvalidParameter(f"tau must lie in [0, 1], got {tau!r}")
        # l1^tau l2^(1-tau) = X^(tau (1-theta)) X^(-theta (1-tau)) = X^(tau - theta)
        terms = np.exp((tau - theta) * logx)
        sums = np.cumsum(terms)
        one_over_p = (1.0 + tau) / 2.0
        out.append(InterpolationSpec(theta, tau, one_over_p, 1.0 / one_over_p, terms, sums,
                                     last_quarter_increment(sums) < CAUCHY_FRACTION,
                                     theta > tau))
    return out


def table_json(specs) -> str:
    return json.dumps([s.to_dict() for s in specs], indent=2)
