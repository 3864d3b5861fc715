# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.  Mirrors ``_pykernels`` function for function."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, pow, fabs, floor, isfinite, M_PI

cdef extern from "math.h" nogil:
    void sincos(double x, double* s, double* c)

cnp.import_array()

cdef double[8] XGK = [
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000]
cdef double[8] WGK = [
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714]
cdef double[4] WG = [
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327]

cdef enum:
    STACK = 512

# K15-G7 differences below this multiple of the roundoff scale are noise
cdef double ROUNDOFF = 50.0 * 2.220446049250313e-16


cdef struct Family:
    int code
    double p1, p2, sign, theta, xi, eta
    int k
    int unit
    int monotone
    double wexp


cdef inline double _gamma(Family* F, double t) nogil:
    if F.code == 0:
        return pow(t, -F.p1)
    return exp(F.p1 / t)


cdef inline double _weight(Family* F, double t) nogil:
    if F.unit:
        return 1.0
    if F.code == 0:
        return pow(t, -F.theta - (F.p2 + 1.0) * (1.0 - F.theta))
    return pow(t, -F.theta) * exp((1.0 - F.theta) * F.p2 / t)


cdef inline double _tk(double t, int k) nogil:
    cdef double r = 1.0
    cdef int i
    for i in range(k):
        r *= t
    return r


cdef inline double _integrand(Family* F, double t, double* re, double* im) nogil:
    """Writes the integrand; returns its roundoff scale |w| (1 + 2 pi |terms of g|)."""
    cdef double lt, gam, w, g, s, c, scale, tk
    if F.code == 0:
        lt = log(t)
        gam = exp(-F.p1 * lt)
        w = 1.0 if F.unit else exp(F.wexp * lt)
    else:
        gam = exp(F.p1 / t)
        w = 1.0 if F.unit else exp(F.wexp * log(t) + (1.0 - F.theta) * F.p2 / t)
    tk = _tk(t, F.k)
    g = F.sign * gam - F.xi * t - F.eta * tk
    # rounding in g scales with its largest term, not with g itself
    scale = fabs(w) * (1.0 + 2.0 * M_PI * (fabs(gam) + fabs(F.xi * t) + fabs(F.eta * tk)))
    g -= floor(g)
    sincos(2.0 * M_PI * g, &s, &c)
    re[0] = w * c
    im[0] = w * s
    return scale


cdef inline double _phase(Family* F, double t) nogil:
    return F.sign * _gamma(F, t) - F.xi * t - F.eta * _tk(t, F.k)


cdef inline double _variation(Family* F, double lo, double hi) nogil:
    if F.monotone:
        return fabs(_phase(F, hi) - _phase(F, lo))
    return (fabs(_gamma(F, lo) - _gamma(F, hi)) + fabs(F.xi) * (hi - lo)
            + fabs(F.eta) * fabs(_tk(hi, F.k) - _tk(lo, F.k)))


cdef inline void _gk15(Family* F, double lo, double hi,
                       double* kre, double* kim, double* err, double* noise) nogil:
    cdef double mid = 0.5 * (lo + hi)
    cdef double half = 0.5 * (hi - lo)
    cdef double fr, fi, fr2, fi2
    cdef double sk_r = 0.0, sk_i = 0.0, sg_r = 0.0, sg_i = 0.0
    cdef double sn = 0.0
    cdef int j
    sn = WGK[7] * _integrand(F, mid, &fr, &fi)
    sk_r = WGK[7] * fr
    sk_i = WGK[7] * fi
    sg_r = WG[3] * fr
    sg_i = WG[3] * fi
    for j in range(7):
        sn += WGK[j] * (_integrand(F, mid - half * XGK[j], &fr, &fi)
                        + _integrand(F, mid + half * XGK[j], &fr2, &fi2))
        sk_r += WGK[j] * (fr + fr2)
        sk_i += WGK[j] * (fi + fi2)
        if j % 2 == 1:
            sg_r += WG[j // 2] * (fr + fr2)
            sg_i += WG[j // 2] * (fi + fi2)
    kre[0] = half * sk_r
    kim[0] = half * sk_i
    fr = half * (sk_r - sg_r)
    fi = half * (sk_i - sg_i)
    err[0] = (fr * fr + fi * fi) ** 0.5
    noise[0] = ROUNDOFF * half * sn


def adaptive_family(int code, double p1, double p2, double sign, int k,
                    double theta, double xi, double eta, double a, double b,
                    double tol, double cap=0.5, long max_cells=2000000,
                    bint unit_weight=False, bint monotone=False):
    """Depth-first adaptive K15 quadrature of exp(2 pi i g) w over [a, b].

    ``monotone=True`` promises g is monotone on [a, b], so the phase variation
    of a cell is exactly |g(hi) - g(lo)|.
    Returns ``(value, err, cells, converged)`` like the NumPy version.
    """
    cdef Family F
    F.code = code
    F.p1 = p1
    F.p2 = p2
    F.sign = sign
    F.theta = theta
    F.xi = xi
    F.eta = eta
    F.k = k
    F.unit = unit_weight
    F.monotone = monotone
    F.wexp = -theta - (p2 + 1.0) * (1.0 - theta) if code == 0 else -theta

    cdef double[STACK] slo
    cdef double[STACK] shi
    cdef int top = 0
    cdef double lo, hi, m, kre, kim, e, width, noise
    cdef double tot_r = 0.0, tot_i = 0.0, err = 0.0
    cdef double span = b - a
    cdef long cells = 0, visited = 0
    cdef bint converged = True

    with nogil:
        slo[0] = a
        shi[0] = b
        top = 1
        while top > 0:
            top -= 1
            lo = slo[top]
            hi = shi[top]
            width = hi - lo
            if visited >= max_cells or top >= STACK - 2:
                _gk15(&F, lo, hi, &kre, &kim, &e, &noise)
                tot_r += kre
                tot_i += kim
                err += e
                cells += 1
                converged = False
                continue
            if not (_variation(&F, lo, hi) <= cap) and width > 4e-16 * fabs(hi):
                m = 0.5 * (lo + hi)
                slo[top] = m
                shi[top] = hi
                slo[top + 1] = lo
                shi[top + 1] = m
                top += 2
                continue
            _gk15(&F, lo, hi, &kre, &kim, &e, &noise)
            visited += 1
            if not (isfinite(kre) and isfinite(kim)):
                converged = False
                err = 1e308
                break
            if e <= tol * width / span or e <= noise or width <= 4e-16 * fabs(hi):
                tot_r += kre
                tot_i += kim
                err += e
                cells += 1
            else:
                m = 0.5 * (lo + hi)
                slo[top] = m
                shi[top] = hi
                slo[top + 1] = lo
                shi[top + 1] = m
                top += 2
    if err >= 1e308:
        return complex(float("nan"), float("nan")), float("inf"), cells, False
    return complex(tot_r, tot_i), err, cells, converged


def curve_sum(cnp.ndarray[cnp.complex128_t, ndim=2] data, double x0, double y0,
              double hx, double hy, double[::1] tx, double[::1] ty,
              cnp.ndarray[cnp.complex128_t, ndim=1] weights, bint periodic):
    """out[iy, ix] = sum_n weights[n] * F(x_ix - tx[n], y_iy - ty[n]), F bilinear."""
    cdef Py_ssize_t ny = data.shape[0], nx = data.shape[1]
    cdef Py_ssize_t nn = tx.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] out = np.zeros((ny, nx), dtype=np.complex128)
    cdef double complex[:, ::1] d = data
    cdef double complex[:, ::1] o = out
    cdef double complex[::1] wv = weights
    cdef Py_ssize_t n, ix, iy
    cdef long iu, iv, i0, i1, j0, j1
    cdef double u, v, fu, fv
    cdef double complex d00, d01, d10, d11, wn, acc
    for n in range(nn):
        wn = wv[n]
        for iy in range(ny):
            v = (iy * hy - ty[n]) / hy
            iv = <long>floor(v)
            fv = v - iv
            for ix in range(nx):
                u = (ix * hx - tx[n]) / hx
                iu = <long>floor(u)
                fu = u - iu
                if periodic:
                    i0 = iu % nx
                    if i0 < 0:
                        i0 += nx
                    i1 = (i0 + 1) % nx
                    j0 = iv % ny
                    if j0 < 0:
                        j0 += ny
                    j1 = (j0 + 1) % ny
                    d00 = d[j0, i0]
                    d01 = d[j0, i1]
                    d10 = d[j1, i0]
                    d11 = d[j1, i1]
                else:
                    d00 = d01 = d10 = d11 = 0
                    if 0 <= iv < ny:
                        if 0 <= iu < nx:
                            d00 = d[iv, iu]
                        if 0 <= iu + 1 < nx:
                            d01 = d[iv, iu + 1]
                    if 0 <= iv + 1 < ny:
                        if 0 <= iu < nx:
                            d10 = d[iv + 1, iu]
                        if 0 <= iu + 1 < nx:
                            d11 = d[iv + 1, iu + 1]
                acc = (1 - fv) * ((1 - fu) * d00 + fu * d01) + fv * ((1 - fu) * d10 + fu * d11)
                o[iy, ix] = o[iy, ix] + wn * acc
    return out
