"""Pure-NumPy implementations of the hot kernels.

Same signatures as the compiled ``_kernels`` module; selected at import when
the extension is unavailable (or when ``OSCINT_PURE_PYTHON`` is set).
"""
import math

import numpy as np

# Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15)
XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])

NODES = np.concatenate([-XGK[:-1], XGK[::-1]])          # 15 nodes, ascending
KW = np.concatenate([WGK[:-1], WGK[::-1]])
GW = np.zeros(15)
GW[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([WG[:-1], WG[::-1]])

TWO_PI = 2.0 * math.pi
# K15-G7 differences below this multiple of the roundoff scale are noise
ROUNDOFF = 50.0 * np.finfo(float).eps
POWER, EXP = 0, 1


def gk15(f, lo, hi, scale=None):
    """Vectorized K15/G7 over cells [lo_i, hi_i].

    Returns ``(K, |K-G|, noise)``; ``scale(x)`` gives the roundoff magnitude
    of the integrand at x (defaults to |f|).
    """
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = mid[:, None] + half[:, None] * NODES[None, :]
    fx = f(x)
    k = half * (fx @ KW)
    g = half * (fx @ GW)
    sx = np.abs(fx) if scale is None else scale(x)
    return k, np.abs(k - g), ROUNDOFF * half * (sx @ KW)


def adaptive(f, variation, a, b, tol, cap=0.5, max_cells=2_000_000, scale=None):
    """Level-synchronous adaptive K15 quadrature.

    A cell is only evaluated once ``variation(lo, hi) <= cap``; it is accepted
    when its error estimate is below its length share of ``tol``.
    Returns ``(value, err, cells, converged)``.
    """
    lo = np.array([a], dtype=float)
    hi = np.array([b], dtype=float)
    span = b - a
    total = 0.0 + 0.0j
    err = 0.0
    cells = 0
    visited = 0
    converged = True
    while lo.size:
        var = variation(lo, hi)
        big = ~(var <= cap)
        ev = ~big
        split_lo = [lo[big]]
        split_hi = [hi[big]]
        if ev.any():
            elo, ehi = lo[ev], hi[ev]
            k, e, noise = gk15(f, elo, ehi, scale)
            bad = ~np.isfinite(k)
            if bad.any():
                return complex(np.nan, np.nan), math.inf, cells, False
            width = ehi - elo
            acc = (e <= tol * width / span) | (e <= noise) | (width <= 4e-16 * np.abs(ehi))
            total += k[acc].sum()
            err += float(e[acc].sum())
            cells += int(acc.sum())
            split_lo.append(elo[~acc])
            split_hi.append(ehi[~acc])
            visited += int(ev.sum())
        lo = np.concatenate(split_lo)
        hi = np.concatenate(split_hi)
        if lo.size and cells + visited + 2 * lo.size > max_cells:
            # budget exhausted: add the remaining cells' best estimates
            k, e, _ = gk15(f, lo, hi, scale)
            total += k.sum()
            err += float(e.sum())
            cells += lo.size
            converged = False
            break
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    return complex(total), err, cells, converged


def _family_funcs(code, p1, p2, sign, k, theta, xi, eta, unit_weight, monotone=False):
    if code == POWER:
        beta, alpha = p1, p2
        wexp = -theta - (alpha + 1.0) * (1.0 - theta)

        def gamma(t):
            return t ** -beta

        def weight(t):
            return t ** wexp
    else:
        sg, sp = p1, p2

        def gamma(t):
            return np.exp(sg / t)

        def weight(t):
            return t ** -theta * np.exp((1.0 - theta) * sp / t)

    def phase(t):
        return sign * gamma(t) - xi * t - eta * t ** k

    def f(t):
        z = np.exp(1j * TWO_PI * np.mod(phase(t), 1.0))
        return z if unit_weight else z * weight(t)

    def scale(t):
        # rounding in g scales with its largest term, not with g itself
        w = 1.0 if unit_weight else np.abs(weight(t))
        return w * (1.0 + TWO_PI * (np.abs(gamma(t)) + np.abs(xi * t) + np.abs(eta * t ** k)))

    ax, ae = abs(xi), abs(eta)

    def variation(lo, hi):
        if monotone:
            return np.abs(phase(hi) - phase(lo))
        return np.abs(gamma(lo) - gamma(hi)) + ax * (hi - lo) + ae * np.abs(hi ** k - lo ** k)

    return f, variation, scale


def adaptive_family(code, p1, p2, sign, k, theta, xi, eta, a, b, tol,
                    cap=0.5, max_cells=2_000_000, unit_weight=False, monotone=False):
    """Adaptive quadrature of exp(2 pi i g) w over [a, b] for a closed-form family.

    ``monotone=True`` promises g is monotone on [a, b], so the phase variation
    of a cell is exactly |g(hi) - g(lo)|.
    """
    f, variation, scale = _family_funcs(code, p1, p2, sign, k, theta, xi, eta, unit_weight,
                                        monotone)
    with np.errstate(over="ignore", invalid="ignore"):
        return adaptive(f, variation, a, b, tol, cap, max_cells, scale)


def curve_sum(data, x0, y0, hx, hy, tx, ty, weights, periodic):
    """out[iy, ix] = sum_n weights[n] * F(x_ix - tx[n], y_iy - ty[n]), F bilinear."""
    ny, nx = data.shape
    xs = x0 + hx * np.arange(nx)
    ys = y0 + hy * np.arange(ny)
    out = np.zeros((ny, nx), dtype=complex)
    for txn, tyn, wn in zip(tx, ty, weights):
        u = (xs - txn - x0) / hx
        v = (ys - tyn - y0) / hy
        iu = np.floor(u).astype(np.int64)
        iv = np.floor(v).astype(np.int64)
        fu = u - iu
        fv = v - iv
        if periodic:
            i0, i1 = iu % nx, (iu + 1) % nx
            j0, j1 = iv % ny, (iv + 1) % ny
            d00 = data[np.ix_(j0, i0)]
            d01 = data[np.ix_(j0, i1)]
            d10 = data[np.ix_(j1, i0)]
            d11 = data[np.ix_(j1, i1)]
        else:
            pad = np.zeros((ny + 2, nx + 2), dtype=complex)
            pad[1:-1, 1:-1] = data
            i0 = np.clip(iu + 1, 0, nx + 1)
            i1 = np.clip(iu + 2, 0, nx + 1)
            j0 = np.clip(iv + 1, 0, ny + 1)
            j1 = np.clip(iv + 2, 0, ny + 1)
            d00 = pad[np.ix_(j0, i0)]
            d01 = pad[np.ix_(j0, i1)]
            d10 = pad[np.ix_(j1, i0)]
            d11 = pad[np.ix_(j1, i1)]
        a = fu[None, :]
        c = fv[:, None]
        out += wn * ((1 - c) * ((1 - a) * d00 + a * d01) + c * ((1 - a) * d10 + a * d11))
    return out
