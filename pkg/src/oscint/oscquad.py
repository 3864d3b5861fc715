"""Oscillation-aware quadrature of exp(2 pi i g(t)) w(t) on subintervals of (0, 1].

Here g(t) = gamma(t) - xi t - eta t^k and w is 1/psi, or t^-theta psi^-(1-theta).

The engine (``integrate_phase``) first locates the critical points of g: the
zero of g'' (at most one, since g'' is decreasing) and the zeros of g' on the
two monotone pieces around it. Where g' stays well away from zero, a
three-term integration-by-parts expansion replaces quadrature. Its remainder
is bounded by the total variation of the last coefficient. The singular end at
t = 0 is always covered this way. The rest goes to adaptive Gauss-Kronrod
quadrature. A cell is only evaluated once the phase moves by at most ``cap``
across it.

The compiled kernels in ``_kernels`` are used when available; set
``OSCINT_PURE_PYTHON=1`` to force the NumPy versions.
"""
from __future__ import annotations

import math
import os
from collections import namedtuple
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from . import _pykernels
from .errors import AssumptionError, DomainError, InvalidParameter
from .phase import CUSTOM, LOG2, PhasePair, invert_log_gamma2

if os.environ.get("OSCINT_PURE_PYTHON"):
    _kern = _pykernels
else:
    try:
        from . import _kernels as _kern
    except ImportError:  # pragma: no cover - depends on the build
        _kern = _pykernels

BACKEND = "python" if _kern is _pykernels else "compiled"

TWO_PI = 2.0 * math.pi
MAX_CELLS = 2_000_000
# log gamma'' at the deepest sample of the singular end
LOG_G2_FLOOR = 500.0
# integration by parts is only trusted where (|g''/g'| + |w'/w|) / (2 pi |g'|) is below this
IBP_EPS = 0.25
# the sampled total variation is multiplied by this before it is reported
TV_SAFETY = 2.0
# relative rounding of one evaluation of g and of the boundary terms
ROUND = 4.0 * np.finfo(float).eps
# windows that skip fewer oscillations than this are left to quadrature
MIN_SKIP = 2.0

PhaseDerivs = namedtuple("PhaseDerivs", "g dg d2g d3g")


@dataclass(frozen=True)
class OperatorSpec:
    """Curve exponent k and weight exponent theta (theta = 0 gives weight 1/psi)."""

    k: int = 2
    theta: float = 0.0

    def __post_init__(self):
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise InvalidParameter(f"k must be an integer >= 1, got {self.k!r}")
        if not (0.0 <= self.theta < 1.0):
            raise InvalidParameter(f"theta must lie in [0, 1), got {self.theta!r}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "theta", float(self.theta))


@dataclass(frozen=True)
class FrequencyPoint:
    xi: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.xi) and math.isfinite(self.eta)):
            raise InvalidParameter(f"frequency ({self.xi!r}, {self.eta!r}) is not finite")
        object.__setattr__(self, "xi", float(self.xi))
        object.__setattr__(self, "eta", float(self.eta))


@dataclass
class QuadResult:
    """Value plus separately reported quadrature error and tail bound.

    ``truncation_tail_bound`` covers everything not done by quadrature (the
    integration-by-parts remainders, including the one at the singular end);
    ``t_min_used`` is the point where explicit quadrature starts.
    """

    value: complex
    abs_error_estimate: float
    cells_used: int
    truncation_tail_bound: float = 0.0
    t_min_used: float = 0.0
    converged: bool = True

    @property
    def total_error(self) -> float:
        return self.abs_error_estimate + self.truncation_tail_bound

    def to_dict(self) -> dict:
        d = asdict(self)
        d["value"] = [self.value.real, self.value.imag]
        d["total_error"] = self.total_error
        return d


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if not np.all((t > 0.0) & (t <= 1.0)):
        raise DomainError("t must lie in (0, 1]")
    return t


def _derivs(v, k, xi, eta, t):
    tk1 = t ** (k - 1)
    g = v.gamma - xi * t - eta * t * tk1
    dg = v.dgamma - xi - eta * k * tk1
    d2g = v.d2gamma
    d3g = v.d3gamma
    if k >= 2:
        d2g = d2g - eta * k * (k - 1) * t ** (k - 2)
    if k >= 3:
        d3g = d3g - eta * k * (k - 1) * (k - 2) * t ** (k - 3)
    return PhaseDerivs(g, dg, d2g, d3g)


def phase_g(p: PhasePair, spec: OperatorSpec, f: FrequencyPoint, t):
    """g and its first three derivatives at t (scalar or array)."""
    t = _check_t(t)
    with np.errstate(over="ignore", invalid="ignore"):
        d = _derivs(p.values(t), spec.k, f.xi, f.eta, t)
    if t.ndim == 0:
        return PhaseDerivs(*(float(x) for x in d))
    return d


# -- the generic engine --------------------------------------------------------

def integrate_oscillatory(g, w, a, b, tol=1e-10, cap=0.5, max_cells=MAX_CELLS) -> QuadResult:
    """Adaptive quadrature of exp(2 pi i g(t)) w(t) over [a, b] for vectorized callables.

    The phase variation of a cell is estimated from g at its ends and midpoint.
    ``w=None`` means w = 1.
    """
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise InvalidParameter(f"need a finite interval a < b, got [{a!r}, {b!r}]")
    if not tol > 0:
        raise InvalidParameter("tol must be positive")

    def f(t):
        z = np.exp(1j * TWO_PI * np.mod(g(t), 1.0))
        return z if w is None else z * w(t)

    def variation(lo, hi):
        m = 0.5 * (lo + hi)
        gl, gm, gh = g(lo), g(m), g(hi)
        return np.abs(gm - gl) + np.abs(gh - gm)

    def scale(t):
        s = 1.0 + TWO_PI * np.abs(g(t))
        return s if w is None else s * np.abs(w(t))

    with np.errstate(over="ignore", invalid="ignore"):
        val, err, cells, ok = _pykernels.adaptive(f, variation, a, b, tol, cap, max_cells, scale)
    return QuadResult(val, err, cells, 0.0, a, ok)


class _Problem:
    """One integrand: a (non-conjugated) pair, k, theta, frequency, weight flag."""

    def __init__(self, p, k, theta, xi, eta, unit, amp=None):
        self.p, self.k, self.theta = p, k, theta
        self.xi, self.eta, self.unit = xi, eta, unit
        self.amp = amp

    def weight(self, t):
        w = 1.0 if self.unit else self.p.weight(t, self.theta)
        return w if self.amp is None else w * self.amp(t)

    def local(self, t):
        """g-derivatives, weight and its log-derivatives at sample points."""
        p = self.p
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            v = p.values(t)
            d = _derivs(v, self.k, self.xi, self.eta, t)
            # size of the largest term of g, which sets its rounding error
            mag = np.abs(v.gamma) + np.abs(self.xi * t) + np.abs(self.eta * t ** self.k)
            if self.unit:
                one = np.ones_like(t)
                w, L, L1 = one, 0.0 * one, 0.0 * one
            else:
                w = p.weight(t, self.theta)
                L = p.dlog_weight(t, self.theta)
                L1 = p.d2log_weight(t, self.theta)
            if self.amp is not None:
                a, da, d2a = _amp_derivs(self.amp, t)
                w = w * a
                L = L + da / a
                L1 = L1 + d2a / a - (da / a) ** 2
            return d, w, L, L1, mag

    def d1(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            v = self.p.values(t)
            return v.dgamma - self.xi - self.eta * self.k * t ** (self.k - 1)

    def ibp(self, t):
        """Boundary term B, coefficients A2 and A0, eligibility mask, g and rounding of B."""
        d, w, L, L1, mag = self.local(t)
        with np.errstate(all="ignore"):
            q = 1.0 / (2j * math.pi * d.dg)
            r = d.d2g / d.dg
            s = d.d3g / d.dg
            a0 = w * q
            a1 = a0 * q * (L - r)
            a2 = a0 * q * q * ((L - r) * (L - 2.0 * r) + L1 - s + r * r)
            eps = (np.abs(r) + np.abs(L)) / (TWO_PI * np.abs(d.dg))
            phase = np.exp(1j * TWO_PI * np.mod(d.g, 1.0))
            b = phase * (a0 - a1 + a2)
            noise = np.abs(b) * TWO_PI * ROUND * (1.0 + mag)
        ok = (eps <= IBP_EPS) & np.isfinite(a2) & np.isfinite(b) & np.isfinite(a0)
        return b, a2, a0, ok, d.g, noise


def _amp_derivs(amp, t):
    """amp, amp' and amp'' by central differences (amp is smooth on the scale of t)."""
    h = 1e-4 * np.maximum(t, 1e-3)
    a0, ap, am = amp(t), amp(t + h), amp(t - h)
    return a0, (ap - am) / (2.0 * h), (ap - 2.0 * a0 + am) / (h * h)


def _t_floor(p: PhasePair) -> float:
    t = getattr(p, "_oscint_t_floor", None)
    if t is None:
        try:
            t = 1.0 if p.log_gamma2_at_1 >= LOG_G2_FLOOR else invert_log_gamma2(p, LOG_G2_FLOOR)
        except Exception:  # gamma'' tops out below the floor level
            t = 1e-300
        t = max(t, 1e-12)
        p._oscint_t_floor = t
    return t


def _root(fun, a, b):
    """Root of a monotone fun on [a, b], solved for asinh(fun) in log t."""
    h = lambda x: math.asinh(float(fun(math.exp(x))))
    x = brentq(h, math.log(a), math.log(b), xtol=1e-15, rtol=8.9e-16, maxiter=200)
    return min(max(math.exp(x), a), b)


def _critical_points(prob: _Problem, start, hi):
    """(t0 or None, sorted zeros of g' in (start, hi))."""
    k, eta = prob.k, prob.eta
    base = np.geomspace(start, hi, 48)
    t0 = None
    pieces = [(start, hi)]
    if k >= 2 and eta > 0:
        c = eta * k * (k - 1)
        lg2 = np.asarray(prob.p.log_gamma2(base))
        h = lg2 - math.log(c) - (k - 2) * np.log(base)
        if h[0] > 0 > h[-1]:
            i = int(np.argmax(h <= 0))
            x = brentq(lambda x: float(prob.p.log_gamma2(math.exp(x))) - math.log(c) - (k - 2) * x,
                       math.log(base[i - 1]), math.log(base[i]), xtol=1e-15, rtol=8.9e-16)
            t0 = math.exp(x)
            pieces = [(start, t0), (t0, hi)]
    zeros = []
    for a, b in pieces:
        ts = np.concatenate([[a], base[(base > a) & (base < b)], [b]])
        s = np.sign(prob.d1(ts))
        idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
        for i in idx[:1]:        # monotone piece: one sign change at most
            zeros.append(_root(prob.d1, ts[i], ts[i + 1]))
        if s[0] == 0:
            zeros.append(a)
        if s[-1] == 0:
            zeros.append(b)
    zeros = sorted(z for z in set(zeros) if start < z < hi)
    return t0, zeros


def _samples(start, hi, crit):
    n = max(16, int(24 * math.log10(hi / start)) + 1)
    pts = [np.geomspace(start, hi, n), np.linspace(start, hi, 65)]
    m = 2.0 ** -np.arange(1, 49)
    for c in crit:
        pts.append(c * (1.0 - m))
        pts.append(c * (1.0 + m))
    t = np.concatenate(pts)
    return np.unique(t[(t >= start) & (t <= hi)])


def _window(ts, a2, ok, g, budget, forced_left, tail0):
    """Best index pair (u, v) for integration by parts inside one segment.

    Returns None when no window is worth it (or possible).
    """
    n = ts.size
    d = np.abs(np.diff(a2))
    # a step the window can never cross, keeping the cumulative sum finite
    d[~(ok[:-1] & ok[1:] & np.isfinite(d))] = 4.0 * budget + 1e-300
    F = np.concatenate([[0.0], np.cumsum(d)])
    if forced_left:
        if not ok[0]:
            return None
        lim = budget - tail0
        if lim < 0:
            return None
        v = int(np.searchsorted(F, lim, side="right")) - 1
        return (0, v) if v >= 0 else None
    u = np.nonzero(ok)[0]
    if u.size == 0:
        return None
    v = np.searchsorted(F, F[u] + budget, side="right") - 1
    gain = np.abs(g[v] - g[u])
    i = int(np.argmax(gain))
    if gain[i] < MIN_SKIP or v[i] <= u[i]:
        return None
    return int(u[i]), int(v[i])


def _quad_piece(prob: _Problem, a, b, tol, cap, max_cells):
    p = prob.p
    code, p1, p2 = p.kernel_params
    if code != CUSTOM and prob.amp is None:
        with np.errstate(over="ignore", invalid="ignore"):
            return _kern.adaptive_family(code, p1, p2, 1.0, prob.k, prob.theta, prob.xi,
                                         prob.eta, a, b, tol, cap, max_cells, prob.unit, True)

    def g(t):
        return prob.local(t)[0].g

    w = None if (prob.unit and prob.amp is None) else prob.weight
    r = integrate_oscillatory(g, w, a, b, tol, cap, max_cells)
    return r.value, r.abs_error_estimate, r.cells_used, r.converged


def integrate_phase(p: PhasePair, spec: OperatorSpec, f: FrequencyPoint, lo: float, hi: float,
                    tol: float = 1e-8, *, unit_weight: bool = False, cap: float = 0.5,
                    max_cells: int = MAX_CELLS, amp=None) -> QuadResult:
    """Integral of exp(2 pi i g) w over [lo, hi], 0 <= lo < hi <= 1.

    ``unit_weight=True`` integrates exp(2 pi i g) alone (the function G).
    ``amp`` is an optional smooth, nonvanishing vectorized factor a(t)
    multiplying the weight (for instance f(x - t, y - t^k)).
    """
    if not (0.0 <= lo < hi <= 1.0):
        raise DomainError(f"need 0 <= lo < hi <= 1, got [{lo!r}, {hi!r}]")
    if not tol > 0:
        raise InvalidParameter("tol must be positive")
    if p.sign < 0:
        # exp(2 pi i (-gamma - xi t - eta t^k)) w is the conjugate of the base integrand at -f
        camp = None if amp is None else (lambda t: np.conj(amp(t)))
        r = integrate_phase(p.base, spec, FrequencyPoint(-f.xi, -f.eta), lo, hi, tol,
                            unit_weight=unit_weight, cap=cap, max_cells=max_cells, amp=camp)
        r.value = r.value.conjugate()
        return r

    prob = _Problem(p, spec.k, spec.theta, f.xi, f.eta, unit_weight, amp)
    start = _t_floor(p) if lo == 0.0 else lo
    if start >= hi:
        start = hi * 0.5
    t0, zeros = _critical_points(prob, start, hi)
    crit = zeros + ([t0] if t0 is not None else [])
    ts = _samples(start, hi, crit)
    B, A2, A0, ok, g, Bnoise = prob.ibp(ts)

    # segments between critical points
    edges = [start] + sorted(c for c in crit if start < c < hi) + [hi]
    cuts = np.searchsorted(ts, edges)
    n_seg = len(edges) - 1
    budget = tol / (2.0 * n_seg * TV_SAFETY)
    value = 0.0 + 0.0j
    tail = 0.0
    bnoise = 0.0
    covered = []          # (t_u, t_v) of windows, in order
    failed_left = False
    for si in range(n_seg):
        i0, i1 = cuts[si], min(cuts[si + 1], ts.size - 1)
        sl = slice(i0, i1 + 1)
        forced = lo == 0.0 and si == 0
        tail0 = abs(A2[0]) if forced else 0.0
        win = _window(ts[sl], A2[sl], ok[sl], g[sl], budget, forced, tail0)
        if win is None:
            failed_left |= forced
            continue
        u, v = i0 + win[0], i0 + win[1]
        tv = float(np.sum(np.abs(np.diff(A2[u:v + 1])))) + tail0
        if forced:
            if abs(A0[0]) > budget:
                failed_left = True
                continue
            value += B[v]
            bnoise += Bnoise[v]
            covered.append((0.0, ts[v]))
        else:
            value += B[v] - B[u]
            bnoise += Bnoise[v] + Bnoise[u]
            covered.append((ts[u], ts[v]))
        tail += TV_SAFETY * tv

    # quadrature on the gaps
    gaps = []
    pos = lo if not failed_left else start
    for a, b in covered:
        if a > pos:
            gaps.append((pos, a))
        pos = max(pos, b)
    if pos < hi:
        gaps.append((pos, hi))
    # split at the critical points so that g is monotone on every piece
    split = []
    for a, b in gaps:
        inner = [c for c in sorted(crit) if a < c < b]
        pts = [a] + inner + [b]
        split.extend(zip(pts[:-1], pts[1:]))
    gaps = [(a, b) for a, b in split if b > a]
    total_len = sum(b - a for a, b in gaps)
    quad_tol = max(tol - tail, tol / 2.0)
    err = bnoise
    cells = 0
    converged = not failed_left
    if failed_left:
        tail = math.inf
    for a, b in gaps:
        val, e, c, ok_ = _quad_piece(prob, a, b, quad_tol * (b - a) / total_len, cap,
                                     max(max_cells - cells, 1))
        value += val
        err += e
        cells += c
        converged &= bool(ok_)
    t_min = gaps[0][0] if gaps else (covered[0][1] if covered else lo)
    if not (math.isfinite(value.real) and math.isfinite(value.imag)) or err + tail > tol:
        converged = False
    return QuadResult(complex(value), float(err), int(cells), float(tail), float(t_min), converged)


def compute_G(p: PhasePair, spec: OperatorSpec, f: FrequencyPoint, s: float,
              tol: float = 1e-10) -> QuadResult:
    """G(s) = int_0^s exp(2 pi i g(t)) dt; with xi = eta = 0 this is Gamma(s)."""
    if not (0.0 < s <= 1.0):
        raise DomainError(f"s={s!r} is outside (0, 1]")
    return integrate_phase(p, spec, f, 0.0, s, tol, unit_weight=True)


# -- truncation from the fitted assumption constants ----------------------------

# constant of the second-derivative van der Corput bound for phase 2 pi gamma
VDC2 = 8.0 / math.sqrt(TWO_PI)


@dataclass(frozen=True)
class TruncationPoint:
    """Dyadic truncation t_min = t_l with the tail bound C 2^{-l rho/3} / (1 - 2^{-rho/3})."""

    t_min: float
    level: int
    tail_bound: float
    constant: float
    rho: float

    def to_dict(self):
        return asdict(self)


def tail_constant(p: PhasePair, spec: OperatorSpec, report) -> tuple[float, float]:
    """(C, rho) of the dyadic tail series from the fitted (a.3)/(a.4) constants."""
    try:
        a3, a4 = report["a3"], report["a4"]
    except (KeyError, TypeError):
        raise AssumptionError("truncation needs fitted a3 and a4 records; run check_assumptions first")
    if not (a3.holds and a4.holds) or a3.fitted_rho is None:
        raise AssumptionError("a3/a4 do not hold on the audit grid; no tail bound available")
    rho = a3.fitted_rho
    c3, c4 = a3.fitted_constant, a4.fitted_constant
    # |Gamma(t_j)| <= VDC2 (g2(1) 2^j)^-1/2 and the cell mass of |psi'|/psi^2 is
    # at most C4 |gamma'''(t_{j+1})|^{1/3} <= C4 C3^{1/3} (g2(1) 2^{j+1})^{1/2 - rho/3}
    g21 = p.gamma2_at_1
    c = VDC2 * c4 * c3 ** (1.0 / 3.0) * 2.0 ** (0.5 - rho / 3.0) * g21 ** (-rho / 3.0)
    return c, rho


def truncation_point(p: PhasePair, spec: OperatorSpec, tol: float, report) -> TruncationPoint:
    """Smallest dyadic level l whose fitted tail bound is below tol."""
    if not tol > 0:
        raise InvalidParameter("tol must be positive")
    c, rho = tail_constant(p, spec, report)
    q = 2.0 ** (-rho / 3.0)
    # C q^l / (1 - q) < tol
    need = math.log(tol * (1.0 - q) / c) / math.log(q)
    level = max(0, math.floor(need) + 1)
    tail = c * q ** level / (1.0 - q)
    while level > 0 and c * q ** (level - 1) / (1.0 - q) < tol:
        level -= 1
        tail = c * q ** level / (1.0 - q)
    t_min = 1.0 if level == 0 else invert_log_gamma2(p, p.log_gamma2_at_1 + level * LOG2)
    return TruncationPoint(t_min, level, tail, c, rho)
