"""The truncated operator T_eps f(x, y) = int_eps^1 f(x - t, y - t^k) K(t) dt on 2-D grids.

K(t) = exp(2 pi i gamma(t)) t^-theta psi(t)^-(1-theta).  Two independent paths:

* ``apply_direct`` sums bilinearly interpolated shifts of f along the curve
  with composite Gauss-Legendre weights in t;
* ``apply_spectral`` multiplies the discrete Fourier transform of f by the
  multiplier m_eps(xi, eta), computed by the oscillatory quadrature engine.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy.interpolate import RectBivariateSpline

from .errors import InvalidParameter, OscintError
from .oscquad import (_kern, FrequencyPoint, OperatorSpec, integrate_phase, tail_constant)
from .phase import PhasePair, dyadic_level

MAGIC = b"OSCF"
# magic, n_x, n_y, 4 reserved zero bytes (aligns the doubles), h_x, h_y: 32 bytes
HEADER = struct.Struct("<4sII4xdd")
GL_NODES = 8


@dataclass
class GridField:
    """Samples data[iy, ix] = f(x0 + ix h_x, y0 + iy h_y)."""

    data: np.ndarray
    h_x: float
    h_y: float
    x0: float = 0.0
    y0: float = 0.0
    periodic: bool = True

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=complex)
        if self.data.ndim != 2 or min(self.data.shape) < 16:
            raise InvalidParameter("a grid field needs a 2-D array with both sizes >= 16")
        if not np.all(np.isfinite(self.data)):
            raise InvalidParameter("grid samples must be finite")
        if not (self.h_x > 0 and self.h_y > 0):
            raise InvalidParameter("grid spacings must be positive")

    @property
    def n_x(self) -> int:
        return self.data.shape[1]

    @property
    def n_y(self) -> int:
        return self.data.shape[0]

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + self.h_x * np.arange(self.n_x)

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + self.h_y * np.arange(self.n_y)

    def l2_norm(self) -> float:
        return math.sqrt(self.h_x * self.h_y * float(np.sum(np.abs(self.data) ** 2)))

    def like(self, data) -> "GridField":
        return GridField(data, self.h_x, self.h_y, self.x0, self.y0, self.periodic)

    # -- I/O -------------------------------------------------------------------
    def to_bytes(self) -> bytes:
        head = HEADER.pack(MAGIC, self.n_x, self.n_y, self.h_x, self.h_y)
        return head + self.data.astype("<c16").tobytes()

    def write(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, buf: bytes, x0=0.0, y0=0.0, periodic=True) -> "GridField":
        if len(buf) < HEADER.size:
            raise InvalidParameter("truncated grid field header")
        magic, nx, ny, hx, hy = HEADER.unpack_from(buf)
        if magic != MAGIC:
            raise InvalidParameter(f"bad magic {magic!r}")
        body = buf[HEADER.size:]
        if len(body) != 16 * nx * ny:
            raise InvalidParameter(f"expected {16 * nx * ny} data bytes, got {len(body)}")
        data = np.frombuffer(body, dtype="<c16").reshape(ny, nx)
        return cls(data.astype(complex), hx, hy, x0, y0, periodic)

    @classmethod
    def read(cls, path, **kw) -> "GridField":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read(), **kw)

    def csv_text(self) -> str:
        lines = ["x,y,re,im"]
        for iy, y in enumerate(self.ys):
            for ix, x in enumerate(self.xs):
                v = self.data[iy, ix]
                lines.append(f"{x:.17g},{y:.17g},{v.real:.17g},{v.imag:.17g}")
        return "\n".join(lines) + "\n"


def square_grid(n: int, length: float = 4.0):
    """(x0, h) for an n-point periodic grid on [-length/2, length/2)."""
    return -0.5 * length, length / n


def gaussian_field(n: int, length: float = 4.0, center=(0.0, 0.0), width: float = 0.25,
                   periodic: bool = True) -> GridField:
    x0, h = square_grid(n, length)
    xs = x0 + h * np.arange(n)
    X, Y = np.meshgrid(xs, xs)
    data = np.exp(-((X - center[0]) ** 2 + (Y - center[1]) ** 2) / (2.0 * width ** 2))
    return GridField(data, h, h, x0, x0, periodic)


def band_limited_field(n: int, rng, kmax: int = 6, length: float = 4.0) -> GridField:
    """Random trigonometric polynomial with |frequency index| <= kmax on each axis."""
    x0, h = square_grid(n, length)
    coef = np.zeros((n, n), dtype=complex)
    idx = np.r_[0:kmax + 1, n - kmax:n]
    sub = rng.standard_normal((idx.size, idx.size)) + 1j * rng.standard_normal((idx.size, idx.size))
    coef[np.ix_(idx, idx)] = sub
    return GridField(np.fft.ifft2(coef) * n, h, h, x0, x0, True)


# -- the curve quadrature shared by the direct path --------------------------------

def curve_nodes(p: PhasePair, spec: OperatorSpec, eps: float, h_x: float = math.inf,
                h_y: float = math.inf, cap: float = 0.5, n_gl: int = GL_NODES):
    """Nodes t_i in [eps, 1] and complex weights W_i = w_i K(t_i).

    Cells are split until gamma moves by at most ``cap``, the cell is no wider
    than h_x and the curve's second coordinate moves by at most h_y.
    """
    if not (0.0 < eps < 1.0):
        raise InvalidParameter(f"eps must lie in (0, 1), got {eps!r}")
    k = spec.k
    lo = np.array([eps])
    hi = np.array([1.0])
    done_lo, done_hi = [], []
    while lo.size:
        gl = p.values(lo).gamma
        gh = p.values(hi).gamma
        w = hi - lo
        bad = (np.abs(gh - gl) > cap) | (w > h_x) | (np.abs(hi ** k - lo ** k) > h_y)
        done_lo.append(lo[~bad])
        done_hi.append(hi[~bad])
        lo, hi = lo[bad], hi[bad]
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    lo = np.concatenate(done_lo)
    hi = np.concatenate(done_hi)
    order = np.argsort(lo)
    lo, hi = lo[order], hi[order]
    x, wq = np.polynomial.legendre.leggauss(n_gl)
    half = 0.5 * (hi - lo)
    t = ((lo + hi)[:, None] * 0.5 + half[:, None] * x[None, :]).ravel()
    wt = (half[:, None] * wq[None, :]).ravel()
    v = p.values(t)
    K = np.exp(2j * math.pi * np.mod(v.gamma, 1.0)) * p.weight(t, spec.theta)
    return t, wt * K


def apply_direct(f: GridField, p: PhasePair, spec: OperatorSpec, eps: float,
                 cap: float = 0.5, n_gl: int = GL_NODES) -> GridField:
    """Direct singular quadrature along the curve with bilinear interpolation of f."""
    t, W = curve_nodes(p, spec, eps, f.h_x, f.h_y, cap, n_gl)
    out = _kern.curve_sum(f.data, f.x0, f.y0, f.h_x, f.h_y, np.ascontiguousarray(t),
                          np.ascontiguousarray(t ** spec.k), np.ascontiguousarray(W), f.periodic)
    return f.like(out)


# -- the Fourier path --------------------------------------------------------------

_MULT_CACHE: dict = {}


def grid_frequencies(f: GridField):
    return np.fft.fftfreq(f.n_x, d=f.h_x), np.fft.fftfreq(f.n_y, d=f.h_y)


def multiplier_grid(p: PhasePair, spec: OperatorSpec, eps: float, xi, eta, tol: float = 1e-9):
    """M[iy, ix] = m_eps(xi[ix], eta[iy]); raises with the frequency on failure."""
    key = (repr(p), spec, float(eps), tuple(np.round(xi, 15)), tuple(np.round(eta, 15)), tol)
    if key in _MULT_CACHE:
        return _MULT_CACHE[key]
    M = np.empty((len(eta), len(xi)), dtype=complex)
    for iy, b in enumerate(eta):
        for ix, a in enumerate(xi):
            fp = FrequencyPoint(float(a), float(b))
            r = integrate_phase(p, spec, fp, eps, 1.0, tol)
            if not r.converged:
                raise OscintError(f"multiplier failed at xi={fp.xi!r}, eta={fp.eta!r} "
                                  f"(error {r.total_error:.3g})")
            M[iy, ix] = r.value
    _MULT_CACHE[key] = M
    return M


def apply_spectral(f: GridField, p: PhasePair, spec: OperatorSpec, eps: float,
                   tol: float = 1e-9, workers: int | None = None) -> GridField:
    """FFT, multiply by m_eps at the grid frequencies, inverse FFT."""
    if not f.periodic:
        raise InvalidParameter("the Fourier path needs a periodic field")
    xi, eta = grid_frequencies(f)
    M = multiplier_grid(p, spec, eps, xi, eta, tol)
    return f.like(sfft.ifft2(sfft.fft2(f.data, workers=workers) * M, workers=workers))


def sampled_sup(p: PhasePair, spec: OperatorSpec, eps: float, f: GridField,
                tol: float = 1e-9) -> float:
    xi, eta = grid_frequencies(f)
    return float(np.max(np.abs(multiplier_grid(p, spec, eps, xi, eta, tol))))


def relative_l2(a: GridField, b: GridField) -> float:
    return float(np.linalg.norm(a.data - b.data) / np.linalg.norm(b.data))


# -- the eps -> 0 limit at one point -----------------------------------------------

@dataclass
class ConvergenceTable:
    eps: np.ndarray
    levels: np.ndarray
    values: np.ndarray
    diffs: np.ndarray             # |I(eps_{m+1}) - I(eps_m)|
    diff_errors: np.ndarray
    envelope: np.ndarray | None
    slope: float                  # d log(diff) / d level

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.diffs) < 0))

    def to_dict(self):
        env = None if self.envelope is None else self.envelope.tolist()
        return {"eps": self.eps.tolist(), "levels": self.levels.tolist(),
                "re": self.values.real.tolist(), "im": self.values.imag.tolist(),
                "diffs": self.diffs.tolist(), "diff_errors": self.diff_errors.tolist(),
                "envelope": env, "slope": self.slope, "monotone": self.monotone}


def _as_callable(f):
    if callable(f):
        return f
    if isinstance(f, GridField):
        re = RectBivariateSpline(f.ys, f.xs, f.data.real, kx=3, ky=3)
        im = RectBivariateSpline(f.ys, f.xs, f.data.imag, kx=3, ky=3)
        return lambda x, y: re.ev(y, x) + 1j * im.ev(y, x)
    raise InvalidParameter("f must be a callable f(x, y) or a GridField")


def epsilon_convergence(f, point, p: PhasePair, spec: OperatorSpec, eps0: float = 0.5,
                        steps: int = 6, tol: float = 1e-11, report=None) -> ConvergenceTable:
    """I(eps) = int_eps^1 f(x - t, y - t^k) K(t) dt on the ladder eps_m = eps0 2^-m.

    ``f`` is a smooth callable (or a GridField, read through a cubic spline).
    With an assumption ``report`` the table carries the dyadic tail envelope
    C 2^(-l rho/3) / (1 - 2^(-rho/3)) at each eps.
    """
    if not (0.0 < eps0 < 1.0) or steps < 1:
        raise InvalidParameter("need 0 < eps0 < 1 and steps >= 1")
    fn = _as_callable(f)
    x, y = float(point[0]), float(point[1])
    k = spec.k
    amp = lambda t: np.asarray(fn(x - t, y - t ** k), dtype=complex)
    eps = eps0 * 2.0 ** -np.arange(steps + 1)
    zero = FrequencyPoint(0.0, 0.0)
    first = integrate_phase(p, spec, zero, eps[0], 1.0, tol, amp=amp)
    values = [first.value]
    diffs, errs = [], []
    for a, b in zip(eps[1:], eps[:-1]):
        r = integrate_phase(p, spec, zero, a, b, tol, amp=amp)
        values.append(values[-1] + r.value)
        diffs.append(abs(r.value))
        errs.append(r.total_error)
    levels = np.asarray(dyadic_level(p.base, eps))
    diffs = np.array(diffs)
    slope = float(np.polyfit(levels[1:], np.log(diffs), 1)[0]) if steps >= 2 else math.nan
    env = None
    if report is not None:
        c, rho = tail_constant(p.base, spec, report)
        q = 2.0 ** (-rho / 3.0)
        env = c * q ** levels / (1.0 - q)
    return ConvergenceTable(eps, levels, np.array(values), diffs, np.array(errs), env, slope)
