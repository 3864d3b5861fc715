"""Stationary sequences for the parabola (k = 2) and the growth of |m| along them.

For t_n in (0, 1) set eta_n = gamma''(t_n)/2 and xi_n = gamma'(t_n) - gamma''(t_n) t_n.
Then g'(t_n) = g''(t_n) = 0, and stationary phase predicts
|m(xi_n, eta_n)| ~ C / (|psi(t_n)| |gamma'''(t_n)|^(1/3)).
"""
from __future__ import annotations

import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .assumptions import check_assumptions
from .errors import DomainError, InvalidParameter
from .multiplier import compute_multiplier, fmt
from .oscquad import FrequencyPoint, OperatorSpec, phase_g
from .phase import PhasePair, eval_phase

SPEC = OperatorSpec(k=2, theta=0.0)


@dataclass
class SharpnessPoint:
    t_n: float
    xi_n: float
    eta_n: float
    predicted: float
    measured_abs_m: float = math.nan
    error: float = math.nan
    converged: bool = True
    stationarity: float = 0.0   # max(|g'|/(|gamma'|+|xi|), |g''|/gamma'') at t_n

    def to_dict(self):
        return asdict(self)


@dataclass
class GrowthReport:
    points: list
    slope_vs_predicted: float
    slope_vs_t: float
    ratios: list
    constant: float
    excluded: list = field(default_factory=list)

    def to_dict(self):
        return {"points": [pt.to_dict() for pt in self.points],
                "slope_vs_predicted": self.slope_vs_predicted,
                "slope_vs_t": self.slope_vs_t, "ratios": self.ratios,
                "constant": self.constant, "excluded": self.excluded}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def csv_text(self) -> str:
        buf = io.StringIO()
        buf.write("predicted,measured\n")
        for pt in self.points:
            buf.write(f"{fmt(pt.predicted)},{fmt(pt.measured_abs_m)}\n")
        return buf.getvalue()

    @property
    def measured(self) -> np.ndarray:
        return np.array([pt.measured_abs_m for pt in self.points])


def default_t_list(p: PhasePair, count: int = 6) -> list:
    """t_n = 2^-n, starting at the first n with gamma''(t_n) >= 32 gamma''(1)."""
    n = 1
    while float(p.log_gamma2(2.0 ** -n)) - p.log_gamma2_at_1 < math.log(32.0):
        n += 1
    return [2.0 ** -(n + i) for i in range(count)]


def sharpness_points(p: PhasePair, t_list, check: bool = True) -> list:
    """The stationary frequencies (xi_n, eta_n) for each t_n, with predictions filled in."""
    t_list = [float(t) for t in t_list]
    if any(not (0.0 < t < 1.0) for t in t_list):
        raise DomainError("every t_n must lie in (0, 1)")
    if any(b >= a for a, b in zip(t_list, t_list[1:])):
        raise InvalidParameter("t_list must be strictly decreasing")
    if check:
        rep = check_assumptions(p, which=("b4", "b5"))
        if not rep["b5"].holds:
            warnings.warn("the quotient 1/(|psi| |gamma'''|^(1/3)) does not grow on the audit "
                          "grid; no divergence is expected along this sequence", stacklevel=2)
    pts = []
    for t in t_list:
        v = eval_phase(p, t)
        eta = 0.5 * v.d2gamma
        xi = v.dgamma - v.d2gamma * t
        d = phase_g(p, SPEC, FrequencyPoint(xi, eta), t)
        stat = max(abs(d.dg) / (abs(v.dgamma) + abs(xi)), abs(d.d2g) / v.d2gamma)
        pred = 1.0 / (abs(v.psi) * abs(v.d3gamma) ** (1.0 / 3.0))
        pts.append(SharpnessPoint(t, xi, eta, pred, stationarity=stat))
    return pts


def _slope(x, y):
    x = np.asarray(x)
    # a constant abscissa (e.g. a prediction that does not grow) has no slope
    if np.ptp(x) <= 1e-9 * max(1.0, float(np.max(np.abs(x)))):
        return math.nan
    return float(np.polyfit(x, y, 1)[0])


def sharpness_growth(p: PhasePair, t_list=None, tol: float = 1e-6,
                     check: bool = True) -> GrowthReport:
    """Measure |m(xi_n, eta_n)| and fit it against the stationary-phase prediction."""
    if t_list is None:
        t_list = default_t_list(p)
    pts = sharpness_points(p, t_list, check=check)
    for pt in pts:
        s = compute_multiplier(p, SPEC, FrequencyPoint(pt.xi_n, pt.eta_n), tol)
        pt.measured_abs_m, pt.error, pt.converged = s.abs, s.error, s.converged
    good = [pt for pt in pts if pt.converged and pt.measured_abs_m > 0]
    excluded = [pt.t_n for pt in pts if pt not in good]
    if len(good) >= 4:
        lm = np.log([pt.measured_abs_m for pt in good])
        slope_p = _slope(np.log([pt.predicted for pt in good]), lm)
        slope_t = _slope(np.log([pt.t_n for pt in good]), lm)
    else:
        slope_p = slope_t = math.nan
    ratios = [pt.measured_abs_m / pt.predicted for pt in pts]
    const = float(np.median([pt.measured_abs_m / pt.predicted for pt in good])) if good else math.nan
    return GrowthReport(pts, slope_p, slope_t, ratios, const, excluded)
