"""Falsification-on-grid audits of the structural assumptions on (gamma, psi).

Nothing here is a proof.  Each check samples the relevant inequality on a
log grid, fits the best constant, and decides "holds" from the trend of the
tested quotient over the deepest decade of the grid (a quotient that must
stay bounded as t -> 0 may not still be growing there).  Every record keeps
the grid it was checked on and the sample where the inequality was tightest.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import AssumptionError, FitFailed
from .phase import LOG2, GridSpec, PhasePair, invert_log_gamma2

ALL_CHECKS = ("a1", "a2", "a3", "a4", "a5", "b4", "b5")
RHO_LADDER = (0.5, 0.25, 0.1, 0.05, 0.01)
DELTA_LADDER = (1.0, 0.75, 0.5, 0.25, 0.1, 0.05, 0.01)

# log-log slope allowed in the "wrong" direction before a quotient counts as
# drifting; absorbs roundoff on exactly-constant quotients
SLOPE_TOL = 1e-6
B5_GROWTH = 10.0
A5_T0 = 0.5


@dataclass
class AssumptionRecord:
    id: str
    holds: bool
    inconclusive: bool = False
    witness_t: float | None = None
    witness_s: float | None = None
    fitted_constant: float | None = None
    fitted_rho: float | None = None
    fitted_epsilon: float | None = None
    note: str = ""
    grid: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        if self.inconclusive:
            return "INCONCLUSIVE"
        return "PASS" if self.holds else "FAIL"


@dataclass
class AssumptionReport:
    phase: dict
    grid: dict
    records: dict

    def __getitem__(self, key) -> AssumptionRecord:
        return self.records[key]

    def __contains__(self, key):
        return key in self.records

    def to_dict(self) -> dict:
        return {"phase": self.phase, "grid": self.grid,
                "records": [_clean(asdict(r)) for r in self.records.values()]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _clean(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, float) and not math.isfinite(v):
            v = None if math.isnan(v) else ("inf" if v > 0 else "-inf")
        out[k] = v
    return out


def _exp(x):
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _deep_slope(x, y, decade=1.0):
    """Least-squares slope of y against x over samples with x <= x.min() + decade*ln10."""
    sel = x <= x.min() + decade * math.log(10.0)
    if sel.sum() < 3:
        sel = np.argsort(x)[:3]
    xs, ys = x[sel], y[sel]
    return float(np.polyfit(xs, ys, 1)[0])


def _bounded_above(logt, logq):
    """A quotient bounded as t -> 0: it may not grow toward the deep end."""
    slope = _deep_slope(logt, logq)
    i = int(np.argmax(logq))
    return slope >= -SLOPE_TOL, i, float(logq[i]), slope


def _bounded_below(logt, logq):
    slope = _deep_slope(logt, logq)
    i = int(np.argmin(logq))
    return slope <= SLOPE_TOL, i, float(logq[i]), slope


def _diff_signs(logs, signs):
    """Signs of f(t_{i+1}) - f(t_i) computed from log-magnitudes."""
    same = signs[1:] == signs[:-1]
    d = np.where(same, signs[1:] * np.sign(logs[1:] - logs[:-1]), signs[1:])
    both_zero = (signs[1:] == 0) & (signs[:-1] == 0)
    return np.where(both_zero, 0.0, d)


def _grid_ok(grid: GridSpec):
    if grid.n < 64 or grid.decades < 4.0 - 1e-9:
        raise AssumptionError(
            f"audit grid needs >= 64 samples over >= 4 decades (got n={grid.n}, "
            f"{grid.decades:.2f} decades)")


def _s_grid(p: PhasePair, t_min: float, n: int):
    """Log-levels s in [gamma''(1), gamma''(t_min)/2] and their preimages."""
    lo = p.log_gamma2_at_1
    hi = float(p.log_gamma2(t_min)) - LOG2
    logs = np.linspace(lo, hi, n)
    t1 = np.array([invert_log_gamma2(p, v) for v in logs])
    t2 = np.array([invert_log_gamma2(p, v + LOG2) for v in logs])
    return logs, t1, t2


def _check_a1(p, t, logs, signs, rec):
    problems = []
    if not np.all(signs.d2gamma > 0):
        i = int(np.argmax(signs.d2gamma <= 0))
        problems.append(("gamma'' > 0", i))
    g2_steps = np.diff(logs.d2gamma)  # t ascending -> must decrease
    if not np.all(g2_steps < 0):
        i = int(np.argmax(g2_steps >= 0))
        problems.append(("gamma'' decreasing", i))
    for name in ("gamma", "dgamma", "d2gamma", "d3gamma", "psi", "dpsi"):
        d = _diff_signs(getattr(logs, name), getattr(signs, name))
        nz = d[d != 0]
        if nz.size and not (np.all(nz > 0) or np.all(nz < 0)):
            i = int(np.argmax(d != nz[0]))
            problems.append((f"{name} monotone", i))
    growth = logs.d2gamma[0] - logs.d2gamma[-1]
    if growth < math.log(1e3):
        problems.append(("gamma'' -> infinity", 0))
    rec.fitted_constant = _exp(logs.d2gamma[-1]) if t[-1] == 1.0 else None
    if problems:
        rec.holds = False
        rec.witness_t = float(t[problems[0][1]])
        rec.note = "violated: " + ", ".join(p for p, _ in problems)
    else:
        rec.holds = True
        rec.witness_t = float(t[0])
        rec.note = f"gamma''(1)={_exp(p.log_gamma2_at_1):.17g} (levels are scaled by it)"


def _fit_ladder(logt, make_logq, ladder, rec):
    for rho in ladder:
        ok, i, lc, _ = _bounded_above(logt, make_logq(rho))
        if ok:
            rec.holds = True
            rec.fitted_rho = rho
            rec.fitted_constant = _exp(lc)
            rec.witness_t = float(np.exp(logt[i]))
            return
    ok, i, lc, slope = _bounded_above(logt, make_logq(ladder[-1]))
    rec.holds = False
    rec.witness_t = float(np.exp(logt[i]))
    rec.fitted_constant = _exp(lc)
    rec.note = f"quotient still growing at the deep end (log-log slope {slope:.3g})"


def a5_epsilons(p: PhasePair, t, iters=200):
    """Smallest eps_t with gamma''(t) >= 2 gamma''((1+eps_t) t), per sample.

    Returns +inf where no eps with (1+eps) t <= 1 works.
    """
    t = np.asarray(t, dtype=float)
    g = np.asarray(p.log_gamma2(t))
    target = g - LOG2
    hi = 1.0 / t - 1.0
    ok = np.asarray(p.log_gamma2(t * (1.0 + hi))) <= target
    lo = np.zeros_like(t)
    hi = np.where(ok, hi, np.nan)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = np.asarray(p.log_gamma2(np.where(ok, t * (1.0 + mid), t))) <= target
        hi = np.where(ok & below, mid, hi)
        lo = np.where(ok & ~below, mid, lo)
    return np.where(ok, hi, np.inf)


def check_assumptions(p: PhasePair, grid: GridSpec | None = None,
                      which=ALL_CHECKS) -> AssumptionReport:
    """Audit the requested subset of a1..a5, b4, b5 on a log grid."""
    grid = grid or GridSpec()
    _grid_ok(grid)
    which = tuple(which)
    unknown = set(which) - set(ALL_CHECKS)
    if unknown:
        raise ValueError(f"unknown assumption ids: {sorted(unknown)}")
    t = grid.points()
    logt = np.log(t)
    logs, signs = p.log_values(t)
    records = {}
    gd = grid.to_dict()

    finite = all(np.all(np.isfinite(getattr(logs, n)) | (getattr(signs, n) == 0))
                 for n in ("d2gamma", "d3gamma", "psi"))
    for key in which:
        rec = AssumptionRecord(id=key, holds=False, grid=dict(gd))
        records[key] = rec
        if not finite:
            rec.inconclusive = True
            rec.note = "evaluator overflow on the grid"
            continue
        if key == "a1":
            _check_a1(p, t, logs, signs, rec)
        elif key == "a2":
            n = min(grid.n, 128)
            ls, t1, t2 = _s_grid(p, grid.t_min, n)
            logq = p.log_values(t2)[0].d3gamma - p.log_values(t1)[0].d3gamma
            # the s -> infinity direction plays the role of t -> 0
            ok, i, lc, slope = _bounded_above(-ls, logq)
            rec.holds = ok
            rec.fitted_constant = _exp(lc)
            rec.witness_s = _exp(ls[i])
            rec.witness_t = float(t1[i])
            rec.grid["s_points"] = n
            if not ok:
                rec.note = f"gamma''' ratio still growing (slope {slope:.3g})"
        elif key == "a3":
            _fit_ladder(logt, lambda r: logs.d3gamma - (1.5 - r) * logs.d2gamma,
                        RHO_LADDER, rec)
        elif key == "a4":
            logq = -logs.psi - logs.d3gamma / 3.0
            ok, i, lc, slope = _bounded_above(logt, logq)
            rec.holds, rec.fitted_constant = ok, _exp(lc)
            rec.witness_t = float(t[i])
            if not ok:
                rec.note = f"1/(|psi| |gamma'''|^(1/3)) grows toward 0 (slope {slope:.3g})"
        elif key == "a5":
            sel = t <= A5_T0
            eps_t = a5_epsilons(p, t[sel])
            i = int(np.argmax(eps_t))
            eps = float(eps_t[i])
            rec.fitted_epsilon = eps
            rec.witness_t = float(t[sel][i])
            rec.holds = math.isfinite(eps) and (1.0 + eps) ** 2 < 2.0
            rec.grid["t0"] = A5_T0
            if not rec.holds:
                rec.note = "(1+eps)^2 >= 2"
        elif key == "b4":
            _fit_ladder(logt, lambda r: -logs.psi - (0.5 - r) * logs.d2gamma,
                        RHO_LADDER, rec)
        elif key == "b5":
            logq = -logs.psi - logs.d3gamma / 3.0
            growth = float(logq[0] - logq[-1])
            rec.holds = growth >= math.log(B5_GROWTH)
            rec.fitted_constant = _exp(growth)
            rec.witness_t = float(t[int(np.argmax(logq))])
            rec.note = f"quotient grew by a factor {_exp(growth):.4g} across the grid"
    return AssumptionReport(phase=p.describe(), grid=gd, records=records)


# -- Lemma-type lower bound and its consequences ------------------------------

@dataclass
class LemmaFit:
    """|gamma'''(t)| >= C gamma''(t)^delta / t^3 on the fit grid."""

    C: float
    delta: float
    t: np.ndarray
    residuals: np.ndarray  # |gamma'''| t^3 / gamma''^delta
    epsilon: float

    @property
    def doubling_delta(self) -> float:
        """The exponent produced by the doubling argument for this eps."""
        return delta_from_epsilon(self.epsilon)


def delta_from_epsilon(eps: float) -> float:
    a = math.log(2.0 / (1.0 + eps)) / math.log(1.0 + eps)
    return (a - 1.0) / (1.0 + a)


def lemma_residuals(p: PhasePair, t, delta):
    logs, _ = p.log_values(t)
    return logs.d3gamma + 3.0 * np.log(t) - delta * logs.d2gamma


def fit_lemma1(p: PhasePair, grid: GridSpec | None = None,
               ladder=DELTA_LADDER) -> LemmaFit:
    """Largest ladder delta for which the residual stays bounded below."""
    grid = grid or GridSpec()
    t = grid.points()
    sel = t <= A5_T0
    eps = float(np.max(a5_epsilons(p, t[sel]))) if sel.any() else math.inf
    if not (math.isfinite(eps) and (1.0 + eps) ** 2 < 2.0):
        raise AssumptionError("doubling assumption on gamma'' fails on this grid")
    logt = np.log(t)
    for delta in ladder:
        lr = lemma_residuals(p, t, delta)
        ok, i, lc, _ = _bounded_below(logt, lr)
        if ok and math.isfinite(lc):
            with np.errstate(over="ignore"):
                res = np.exp(lr)
            return LemmaFit(C=_exp(lc), delta=delta, t=t, residuals=res, epsilon=eps)
    raise FitFailed("no positive delta on the ladder keeps the residual bounded below")


def seriescon_check(p: PhasePair, delta: float, C: float | None = None,
                    t_min: float = 1e-8, n: int = 128):
    """Check t(s) |gamma'''(t(s))|^(1/3) >= c s^(delta/3) on a level grid.

    Returns ``(holds, c, witness_s)``; with ``C`` given (the lemma constant)
    the lower constant must also be at least C^(1/3).
    """
    lo = p.log_gamma2_at_1
    hi = float(p.log_gamma2(t_min))
    ls = np.linspace(lo, hi, n)
    ts = np.array([invert_log_gamma2(p, v) for v in ls])
    logs, _ = p.log_values(ts)
    lq = np.log(ts) + logs.d3gamma / 3.0 - delta * ls / 3.0
    ok, i, lc, _ = _bounded_below(-ls, lq)
    c = _exp(lc)
    if C is not None:
        ok = ok and c >= C ** (1.0 / 3.0) * (1 - 1e-12)
    return ok, c, _exp(ls[i])


def check_gamma2comp(p: PhasePair, eps: float, t_min=1e-8, n=128):
    """t(2s) <= t(s) <= (1+eps) t(2s) over the level grid; returns (ok, worst ratio)."""
    _, t1, t2 = _s_grid(p, t_min, n)
    ratio = t1 / t2
    return bool(np.all(t2 <= t1) and np.all(ratio <= 1.0 + eps + 1e-12)), float(ratio.max())


def check_gamma3comp(p: PhasePair, C: float, t_min=1e-8, n=128):
    """|g'''(t(s))| <= |g'''(t(2s))| <= C |g'''(t(s))|; returns (ok, worst ratio)."""
    _, t1, t2 = _s_grid(p, t_min, n)
    l1 = p.log_values(t1)[0].d3gamma
    l2 = p.log_values(t2)[0].d3gamma
    d = l2 - l1
    return bool(np.all(d >= -1e-12) and np.all(d <= math.log(C) + 1e-12)), _exp(float(d.max()))
