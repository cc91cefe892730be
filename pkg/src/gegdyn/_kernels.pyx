# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Hessenberg QR eigenvalues and the 2-D basin sweep.

Mirrors ``_fallback`` operation for operation.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, copysign, isfinite

cnp.import_array()

DEF QUADRATIC = 0
DEF MULTI = 1

cdef int CONVERGED = 0
cdef int DIVERGED = 1
cdef int MAX_ITERS = 2
cdef int CYCLE = 3
cdef int CAPTURED = 10


cdef int _hqr(double[:, ::1] a, double[::1] wr, double[::1] wi) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t nn, l, m, k, i, j, mmin
    cdef double anorm = 0.0, t = 0.0
    cdef double p = 0.0, q = 0.0, r = 0.0, s, w, x, y, z, u, v
    cdef int its = 0
    cdef long total = 0, limit = 30 * n
    cdef bint last_row

    for i in range(n):
        j = i - 1 if i > 0 else 0
        while j < n:
            anorm += fabs(a[i, j])
            j += 1
    nn = n - 1
    while nn >= 0:
        l = nn
        while l >= 1:
            s = fabs(a[l - 1, l - 1]) + fabs(a[l, l])
            if s == 0.0:
                s = anorm
            if fabs(a[l, l - 1]) + s == s:
                a[l, l - 1] = 0.0
                break
            l -= 1
        x = a[nn, nn]
        if l == nn:
            wr[nn] = x + t
            wi[nn] = 0.0
            nn -= 1
            its = 0
            continue
        y = a[nn - 1, nn - 1]
        w = a[nn, nn - 1] * a[nn - 1, nn]
        if l == nn - 1:
            p = 0.5 * (y - x)
            q = p * p + w
            z = sqrt(fabs(q))
            x += t
            if q >= 0.0:
                z = p + copysign(z, p)
                wr[nn - 1] = x + z
                wr[nn] = x + z
                if z != 0.0:
                    wr[nn] = x - w / z
                wi[nn - 1] = 0.0
                wi[nn] = 0.0
            else:
                wr[nn - 1] = x + p
                wr[nn] = x + p
                wi[nn - 1] = -z
                wi[nn] = z
            nn -= 2
            its = 0
            continue
        if total >= limit:
            return 0
        if its == 10 or its == 20:
            t += x
            for i in range(nn + 1):
                a[i, i] -= x
            s = fabs(a[nn, nn - 1]) + fabs(a[nn - 1, nn - 2])
            x = 0.75 * s
            y = x
            w = -0.4375 * s * s
        its += 1
        total += 1
        m = nn - 2
        while m >= l:
            z = a[m, m]
            r = x - z
            s = y - z
            p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
            q = a[m + 1, m + 1] - z - r - s
            r = a[m + 2, m + 1]
            s = fabs(p) + fabs(q) + fabs(r)
            p /= s
            q /= s
            r /= s
            if m == l:
                break
            u = fabs(a[m, m - 1]) * (fabs(q) + fabs(r))
            v = fabs(p) * (fabs(a[m - 1, m - 1]) + fabs(z) + fabs(a[m + 1, m + 1]))
            if u + v == v:
                break
            m -= 1
        for i in range(m + 2, nn + 1):
            a[i, i - 2] = 0.0
            if i != m + 2:
                a[i, i - 3] = 0.0
        for k in range(m, nn):
            last_row = k == nn - 1
            if k != m:
                p = a[k, k - 1]
                q = a[k + 1, k - 1]
                r = 0.0 if last_row else a[k + 2, k - 1]
                x = fabs(p) + fabs(q) + fabs(r)
                if x != 0.0:
                    p /= x
                    q /= x
                    r /= x
            s = copysign(sqrt(p * p + q * q + r * r), p)
            if s == 0.0:
                continue
            if k == m:
                if l != m:
                    a[k, k - 1] = -a[k, k - 1]
            else:
                a[k, k - 1] = -s * x
            p += s
            x = p / s
            y = q / s
            z = r / s
            q /= p
            r /= p
            for j in range(k, nn + 1):
                p = a[k, j] + q * a[k + 1, j]
                if not last_row:
                    p += r * a[k + 2, j]
                    a[k + 2, j] -= p * z
                a[k + 1, j] -= p * y
                a[k, j] -= p * x
            mmin = nn if nn < k + 3 else k + 3
            for i in range(l, mmin + 1):
                p = x * a[i, k] + y * a[i, k + 1]
                if not last_row:
                    p += z * a[i, k + 2]
                    a[i, k + 2] -= p * r
                a[i, k + 1] -= p * q
                a[i, k] -= p
    return 1


def hqr_eigenvalues(h):
    """Eigenvalues of an upper Hessenberg matrix; returns ``(wr, wi, ok)``."""
    cdef double[:, ::1] a = np.array(h, dtype=np.float64, order="C", copy=True)
    n = a.shape[0]
    wr = np.zeros(n)
    wi = np.zeros(n)
    cdef double[::1] wr_v = wr
    cdef double[::1] wi_v = wi
    cdef int ok
    with nogil:
        ok = _hqr(a, wr_v, wi_v)
    return wr, wi, bool(ok)


cdef inline void _grad(int kind, const double* c, double x, double y,
                       double* gx, double* gy) noexcept nogil:
    cdef double xm, ym, a, b, f1, f2, f1x, f1y, f2x, f2y, ax, ay, bx, by
    if kind == QUADRATIC:
        gx[0] = 2.0 * c[0] * x + c[1] * y
        gy[0] = c[1] * x + 2.0 * c[2] * y
        return
    xm = x - 1.0
    ym = y - 1.0
    a = xm * xm * (ym * ym)
    b = x * x * (y * y)
    f1 = c[0] * x * x + c[1] * y * y + c[2] * x * y
    f2 = c[3] * x * x + c[4] * y * y + c[5] * x * y
    f1x = 2.0 * c[0] * x + c[2] * y
    f1y = 2.0 * c[1] * y + c[2] * x
    f2x = 2.0 * c[3] * x + c[5] * y
    f2y = 2.0 * c[4] * y + c[5] * x
    ax = 2.0 * xm * (ym * ym)
    ay = 2.0 * ym * (xm * xm)
    bx = 2.0 * x * (y * y)
    by = 2.0 * y * (x * x)
    gx[0] = f1x * a + f1 * ax + f2x * b + f2 * bx
    gy[0] = f1y * a + f1 * ay + f2y * b + f2 * by


cdef void _sweep_range(int kind, const double* c, const double[:, ::1] starts,
                       double h1x, double h1y, double h2x, double h2y,
                       double tol_grad, long consecutive, long max_iters, double blowup,
                       const double[:, ::1] centers, const double[:, ::1] pmats,
                       const double[::1] levels, long window, double cycle_tol,
                       double[:, ::1] ring,
                       long[::1] codes, double[:, ::1] points, long[::1] iters,
                       double[::1] gnorms, Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    cdef Py_ssize_t cell, j, s, filled
    cdef long k, consec, code, slot
    cdef double x, y, gx, gy, gn, xh, yh, gxh, gyh, dx, dy, v
    cdef Py_ssize_t nattr = levels.shape[0]
    for cell in range(lo, hi):
        x = starts[cell, 0]
        y = starts[cell, 1]
        k = 0
        consec = 0
        while True:
            _grad(kind, c, x, y, &gx, &gy)
            gn = sqrt(gx * gx + gy * gy)
            code = -1
            if not (isfinite(x) and isfinite(y) and isfinite(gn)) or sqrt(x * x + y * y) > blowup:
                code = DIVERGED
            if gn <= tol_grad:
                consec += 1
            else:
                consec = 0
            if code < 0 and consec >= consecutive:
                code = CONVERGED
            if code < 0:
                for j in range(nattr):
                    dx = x - centers[j, 0]
                    dy = y - centers[j, 1]
                    v = (dx * (pmats[j, 0] * dx + pmats[j, 1] * dy)
                         + dy * (pmats[j, 2] * dx + pmats[j, 3] * dy))
                    if v <= levels[j]:
                        code = CAPTURED + j
                        break
            if code < 0 and k >= max_iters:
                code = MAX_ITERS
                if window > 0 and k > 0:
                    filled = window if k > window else k
                    for s in range(filled):
                        dx = x - ring[cell - lo, 2 * s]
                        dy = y - ring[cell - lo, 2 * s + 1]
                        if sqrt(dx * dx + dy * dy) <= cycle_tol:
                            code = CYCLE
                            break
            if code >= 0:
                codes[cell] = code
                points[cell, 0] = x
                points[cell, 1] = y
                iters[cell] = k
                gnorms[cell] = gn
                break
            if window > 0 and k >= max_iters - window:
                slot = k % window
                ring[cell - lo, 2 * slot] = x
                ring[cell - lo, 2 * slot + 1] = y
            xh = x - h1x * gx
            yh = y + h1y * gy
            _grad(kind, c, xh, yh, &gxh, &gyh)
            x = x - h2x * gxh
            y = y + h2y * gyh
            k += 1


def sweep_poly2d(int kind, coeffs, starts, double h1x, double h1y, double h2x, double h2y,
                 double tol_grad, long consecutive, long max_iters, double blowup,
                 centers, pmats, levels, long cycle_window, double cycle_tol,
                 Py_ssize_t lo=0, Py_ssize_t hi=-1, out=None):
    """Compiled counterpart of ``_fallback.sweep_poly2d``.

    ``lo``/``hi`` restrict the work to a slice of start points and ``out``
    supplies preallocated result arrays, so callers can split a sweep over
    threads (the loop runs without the GIL).
    """
    cdef double cbuf[6]
    cdef Py_ssize_t i
    cvals = np.zeros(6)
    cvals[: len(coeffs)] = coeffs
    for i in range(6):
        cbuf[i] = cvals[i]
    cdef double[:, ::1] st = np.ascontiguousarray(starts, dtype=np.float64)
    n = st.shape[0]
    if hi < 0:
        hi = n
    if out is None:
        out = (np.full(n, -1, dtype=np.int64), np.array(st, copy=True),
               np.zeros(n, dtype=np.int64), np.zeros(n))
    cdef long[::1] codes = out[0]
    cdef double[:, ::1] points = out[1]
    cdef long[::1] iters = out[2]
    cdef double[::1] gnorms = out[3]
    cdef double[:, ::1] cen = np.ascontiguousarray(np.reshape(centers, (-1, 2)), dtype=np.float64)
    cdef double[:, ::1] pm = np.ascontiguousarray(np.reshape(pmats, (-1, 4)), dtype=np.float64)
    cdef double[::1] lev = np.ascontiguousarray(np.ravel(levels), dtype=np.float64)
    cdef long window = cycle_window if cycle_window > 0 else 0
    cdef double[:, ::1] ring = np.zeros((max(hi - lo, 1), 2 * max(window, 1)))
    with nogil:
        _sweep_range(kind, cbuf, st, h1x, h1y, h2x, h2y, tol_grad, consecutive, max_iters,
                     blowup, cen, pm, lev, window, cycle_tol, ring,
                     codes, points, iters, gnorms, lo, hi)
    return out
