"""The multiplier m(xi, eta) = int_0^1 exp(2 pi i (gamma - xi t - eta t^k)) w(t) dt.

Besides single evaluations this module reproduces the three-piece split at
the zero t0 of g'', runs sup-scans over frequency regions and evaluates the
single-cell pieces m_j of the dyadic decomposition.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from .errors import InvalidParameter, NoSplit
from .oscquad import (FrequencyPoint, OperatorSpec, QuadResult, integrate_phase)
from .phase import LOG2, PhasePair, dyadic_level, invert_log_gamma2


@dataclass(frozen=True)
class SplitInfo:
    """t0 with its level l (t_{l+1} < t0 <= t_l) and split points a = t_{l+2}, b = t_{l-1}."""

    t0: float
    l: int
    a: float
    b: float

    def to_dict(self):
        return {"t0": self.t0, "l": self.l, "a": self.a, "b": self.b}


@dataclass
class MultiplierSample:
    freq: FrequencyPoint
    value: complex
    abs: float
    error: float
    split: SplitInfo | None = None
    converged: bool = True
    result: QuadResult | None = None


def breakpoint(p: PhasePair, j: int) -> float:
    """t_j, cached on the pair."""
    cache = p.__dict__.setdefault("_oscint_breaks", {})
    t = cache.get(j)
    if t is None:
        t = 1.0 if j <= 0 else invert_log_gamma2(p, p.log_gamma2_at_1 + j * LOG2)
        cache[j] = t
    return t


def find_t0(p: PhasePair, spec: OperatorSpec, eta: float) -> SplitInfo:
    """Zero of g'' = gamma'' - eta k (k-1) t^(k-2), or t0 = 1 when g'' >= 0 on (0, 1]."""
    k = spec.k
    if k < 2 or not eta > 0:
        raise NoSplit("the split needs k >= 2 and eta > 0")
    p = p.base
    c = eta * k * (k - 1)
    lc = math.log(c)
    if c <= p.gamma2_at_1:
        t0 = 1.0
    else:
        def h(x):
            return float(p.log_gamma2(math.exp(x))) - lc - (k - 2) * x

        # dyadic bracket: h decreases in x, h(0) < 0
        j = 1
        while h(math.log(breakpoint(p, j))) < 0:
            j *= 2
        lo = math.log(breakpoint(p, j))
        hi = math.log(breakpoint(p, j // 2)) if j > 1 else 0.0
        x = brentq(h, lo, hi, xtol=1e-300, rtol=1e-13, maxiter=500)
        t0 = math.exp(x)
        # make sure gamma''(t0) >= eta k (k-1) t0^(k-2) holds in floating point
        while h(math.log(t0)) < 0:
            t0 = float(np.nextafter(t0, 0.0))
    l = int(dyadic_level(p, t0))
    a = breakpoint(p, l + 2)
    b = 1.0 if l <= 1 else breakpoint(p, l - 1)
    return SplitInfo(t0, l, a, b)


def compute_multiplier(p: PhasePair, spec: OperatorSpec, f: FrequencyPoint, tol: float = 1e-8,
                       eps: float = 0.0, cap: float = 0.5) -> MultiplierSample:
    """m(xi, eta) (over [eps, 1] when eps > 0) with total error <= tol on success."""
    r = integrate_phase(p, spec, f, eps, 1.0, tol, cap=cap)
    return MultiplierSample(f, r.value, abs(r.value), r.total_error, None, r.converged, r)


@dataclass
class SplitResult:
    piece1: QuadResult
    piece2: QuadResult
    piece3: QuadResult
    split: SplitInfo

    @property
    def sum(self) -> complex:
        return self.piece1.value + self.piece2.value + self.piece3.value

    @property
    def error(self) -> float:
        return self.piece1.total_error + self.piece2.total_error + self.piece3.total_error


def compute_multiplier_split(p: PhasePair, spec: OperatorSpec, f: FrequencyPoint,
                             tol: float = 1e-8) -> SplitResult:
    """m over (0, a], [a, b] and [b, 1]; the third piece is empty when l <= 1."""
    sp = find_t0(p, spec, f.eta)
    t = tol / 3.0
    p1 = integrate_phase(p, spec, f, 0.0, sp.a, t)
    p2 = integrate_phase(p, spec, f, sp.a, sp.b, t)
    if sp.b < 1.0:
        p3 = integrate_phase(p, spec, f, sp.b, 1.0, t)
    else:
        p3 = QuadResult(0j, 0.0, 0, 0.0, 1.0, True)
    return SplitResult(p1, p2, p3, sp)


def compute_mj(p: PhasePair, spec: OperatorSpec, j: int, f: FrequencyPoint,
               tol: float = 1e-10) -> QuadResult:
    """m_j: the multiplier restricted to the dyadic cell [t_{j+1}, t_j]."""
    if j < 0:
        raise InvalidParameter("j must be nonnegative")
    lo, hi = breakpoint(p.base, j + 1), breakpoint(p.base, j)
    return integrate_phase(p, spec, f, lo, hi, tol)


# -- scans -----------------------------------------------------------------------

LAWS = ("lin", "log", "two-sided-log")


@dataclass(frozen=True)
class AxisSpec:
    """One scan axis: range, count and grid law.

    ``two-sided-log`` puts log-spaced magnitudes in [min_abs, |end|] on each
    side of zero (plus zero itself when the range straddles it).
    """

    lo: float
    hi: float
    n: int
    law: str = "two-sided-log"
    min_abs: float = 1e-2

    def __post_init__(self):
        if self.law not in LAWS:
            raise InvalidParameter(f"unknown grid law {self.law!r}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.hi <= self.lo:
            raise InvalidParameter(f"empty axis range [{self.lo!r}, {self.hi!r}]")
        if self.n < 1:
            raise InvalidParameter("axis needs at least one sample")
        if self.law == "log" and self.lo <= 0:
            raise InvalidParameter("log law needs a positive range")
        if not self.min_abs > 0:
            raise InvalidParameter("min_abs must be positive")

    # monotone map to a coordinate in which the law is uniform
    def to_u(self, x):
        x = np.asarray(x, dtype=float)
        if self.law == "lin":
            return x
        if self.law == "log":
            return np.log10(x)
        ax = np.abs(x)
        big = ax >= self.min_abs
        with np.errstate(divide="ignore"):
            u_big = np.sign(x) * (np.log10(np.where(big, ax, 1.0) / self.min_abs) + 1.0)
        return np.where(big, u_big, x / self.min_abs)

    def from_u(self, u):
        u = np.asarray(u, dtype=float)
        if self.law == "lin":
            return u
        if self.law == "log":
            return 10.0 ** u
        au = np.abs(u)
        return np.where(au >= 1.0, np.sign(u) * self.min_abs * 10.0 ** (au - 1.0),
                        u * self.min_abs)

    def points(self) -> np.ndarray:
        if self.law == "lin":
            return np.linspace(self.lo, self.hi, self.n)
        if self.law == "log":
            return np.geomspace(self.lo, self.hi, self.n)
        if self.lo >= 0 or self.hi <= 0:
            a, b = sorted((abs(self.lo), abs(self.hi)))
            a = max(a, self.min_abs)
            m = np.geomspace(a, b, self.n)
            return m if self.hi > 0 else -m[::-1]
        n_neg = (self.n - 1) // 2
        n_pos = self.n - 1 - n_neg
        neg = -np.geomspace(self.min_abs, -self.lo, n_neg)[::-1] if n_neg else np.empty(0)
        pos = np.geomspace(self.min_abs, self.hi, n_pos) if n_pos else np.empty(0)
        return np.concatenate([neg, [0.0], pos])

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "n": self.n, "law": self.law,
                "min_abs": self.min_abs}


@dataclass(frozen=True)
class ScanRegion:
    xi: AxisSpec
    eta: AxisSpec

    def to_dict(self):
        return {"xi": self.xi.to_dict(), "eta": self.eta.to_dict()}


@dataclass
class ScanResult:
    """Sampled |m| with running sup.

    Samples are kept in evaluation order: the base grid in row-major (xi, eta)
    order, then each refinement level in its own row-major order.
    """

    region: ScanRegion
    tol: float
    xi: np.ndarray
    eta: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    level: np.ndarray
    history: list = field(default_factory=list)
    failures: int = 0

    @property
    def sup_abs(self) -> float:
        """nan when no sample converged."""
        a = np.abs(self.values)
        if not np.any(np.isfinite(a)):
            return math.nan if a.size else 0.0
        return float(np.nanmax(a))

    @property
    def argmax(self) -> FrequencyPoint | None:
        a = np.abs(self.values)
        if not np.any(np.isfinite(a)):
            return None
        i = int(np.nanargmax(a))
        return FrequencyPoint(float(self.xi[i]), float(self.eta[i]))

    @property
    def n_samples(self) -> int:
        return int(self.values.size)

    @property
    def refinements(self) -> int:
        return len(self.history) - 1

    def summary(self) -> dict:
        am = self.argmax
        return {"sup_abs": self.sup_abs, "argmax_xi": am and am.xi, "argmax_eta": am and am.eta,
                "n_samples": self.n_samples, "refinements": self.refinements}

    def write_csv(self, fh) -> None:
        fh.write("xi,eta,re_m,im_m,abs_m,err\n")
        for x, y, v, e in zip(self.xi, self.eta, self.values, self.errors):
            fh.write(",".join(fmt(z) for z in (x, y, v.real, v.imag, abs(v), e)) + "\n")

    def csv_text(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def fmt(x: float) -> str:
    """Full-precision decimal (17 significant digits)."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _evaluate(p, spec, xs, ys, tol, cap):
    vals = np.empty(xs.size, dtype=complex)
    errs = np.empty(xs.size)
    failures = 0
    for i, (x, y) in enumerate(zip(xs, ys)):
        try:
            r = integrate_phase(p, spec, FrequencyPoint(x, y), 0.0, 1.0, tol, cap=cap)
            ok = r.converged
        except (ArithmeticError, ValueError):
            ok = False
        if ok:
            vals[i], errs[i] = r.value, r.total_error
        else:
            vals[i], errs[i] = complex(np.nan, np.nan), np.inf
            failures += 1
    return vals, errs, failures


def _refine_axes(region: ScanRegion, center: FrequencyPoint, level: int, half=2):
    """Local axes around center with density 2^level relative to the base grid."""
    out = []
    for ax, c in ((region.xi, center.xi), (region.eta, center.eta)):
        u = ax.to_u(ax.points())
        du = float(np.min(np.diff(u))) if u.size > 1 else 1.0
        uc = float(ax.to_u(c))
        m = half * 2 ** level
        loc = uc + du * np.arange(-m, m + 1) / 2 ** level
        lo, hi = float(ax.to_u(ax.lo)), float(ax.to_u(ax.hi))
        loc = loc[(loc >= lo - 1e-12) & (loc <= hi + 1e-12)]
        out.append(ax.from_u(loc))
    return out


def _append(scan: ScanResult, xs, ys, lev, p, spec, cap):
    seen = set(zip(scan.xi.tolist(), scan.eta.tolist()))
    keep = [(x, y) for x, y in zip(xs, ys) if (x, y) not in seen]
    if keep:
        nx = np.array([k[0] for k in keep])
        ny = np.array([k[1] for k in keep])
        v, e, fails = _evaluate(p, spec, nx, ny, scan.tol, cap)
        scan.xi = np.concatenate([scan.xi, nx])
        scan.eta = np.concatenate([scan.eta, ny])
        scan.values = np.concatenate([scan.values, v])
        scan.errors = np.concatenate([scan.errors, e])
        scan.level = np.concatenate([scan.level, np.full(nx.size, lev)])
        scan.failures += fails
    am = scan.argmax
    scan.history.append({"level": lev, "new_samples": len(keep), "sup_abs": scan.sup_abs,
                         "argmax_xi": am and am.xi, "argmax_eta": am and am.eta})


def scan_multiplier(p: PhasePair, spec: OperatorSpec, region: ScanRegion, tol: float = 1e-5,
                    refinements: int = 2, cap: float = 1.0) -> ScanResult:
    """sup |m| over the region's grid, refined around the running argmax.

    Refinement level r evaluates a (4 2^r + 1)^2 patch spanning two base cells
    on each side of the current argmax, at 2^r times the base density, plus the
    end point of a local Nelder-Mead climb started at that argmax.
    """
    if not tol > 0:
        raise InvalidParameter("tol must be positive")
    X, Y = np.meshgrid(region.xi.points(), region.eta.points(), indexing="ij")
    empty = np.empty(0)
    scan = ScanResult(region, tol, empty, empty, np.empty(0, dtype=complex), empty,
                      np.empty(0, dtype=int))
    _append(scan, X.ravel(), Y.ravel(), 0, p, spec, cap)
    return extend_scan(scan, p, spec, refinements, cap)


def extend_scan(scan: ScanResult, p: PhasePair, spec: OperatorSpec, levels: int = 1,
                cap: float = 1.0) -> ScanResult:
    """Add ``levels`` further refinement levels to an existing scan (in place)."""
    for _ in range(levels):
        if scan.argmax is None:
            break       # nothing converged, nowhere to refine
        lev = len(scan.history)
        xs, ys = _refine_axes(scan.region, scan.argmax, lev)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        px, py = _polish(scan, p, spec, cap)
        _append(scan, np.append(X.ravel(), px), np.append(Y.ravel(), py), lev, p, spec, cap)
    return scan


def _polish(scan: ScanResult, p, spec, cap, maxiter=400):
    """Nelder-Mead climb of |m| from the current argmax, clipped to the region.

    Narrow peaks are otherwise only approached one patch at a time, so the sup
    would keep creeping up with every refinement level.
    """
    am = scan.argmax
    lo = np.array([scan.region.xi.lo, scan.region.eta.lo])
    hi = np.array([scan.region.xi.hi, scan.region.eta.hi])

    def neg(z):
        z = np.clip(z, lo, hi)
        try:
            r = integrate_phase(p, spec, FrequencyPoint(z[0], z[1]), 0.0, 1.0, scan.tol, cap=cap)
        except (ArithmeticError, ValueError):
            return 0.0
        return -abs(r.value) if r.converged else 0.0

    res = minimize(neg, [am.xi, am.eta], method="Nelder-Mead",
                   options={"xatol": 1e-6 * (1 + abs(am.xi) + abs(am.eta)), "fatol": 1e-10,
                            "maxiter": maxiter})
    z = np.clip(res.x, lo, hi)
    return [float(z[0])], [float(z[1])]
