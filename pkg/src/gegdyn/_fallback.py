"""Pure-Python implementations of the hot kernels.

Same algorithms and signatures as the compiled ``_kernels`` extension; the
backend loader picks this module when the extension is not importable.
"""

import math

import numpy as np

from . import _poly2d

# sweep status codes, shared with the compiled kernel
CONVERGED = 0
DIVERGED = 1
MAX_ITERS = 2
CYCLE = 3
CAPTURED = 10


def hqr_eigenvalues(h):
    """Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR.

    Returns ``(wr, wi, ok)``; ``ok`` is False when the total number of QR
    sweeps exceeds ``30 * n``. ``h`` is not modified.
    """
    n = h.shape[0]
    a = [list(map(float, row)) for row in h]
    wr = [0.0] * n
    wi = [0.0] * n
    anorm = 0.0
    for i in range(n):
        for j in range(max(i - 1, 0), n):
            anorm += abs(a[i][j])
    nn = n - 1
    t = 0.0
    its = 0
    total = 0
    limit = 30 * n
    while nn >= 0:
        l = nn
        while l >= 1:
            s = abs(a[l - 1][l - 1]) + abs(a[l][l])
            if s == 0.0:
                s = anorm
            if abs(a[l][l - 1]) + s == s:
                a[l][l - 1] = 0.0
                break
            l -= 1
        x = a[nn][nn]
        if l == nn:
            wr[nn] = x + t
            wi[nn] = 0.0
            nn -= 1
            its = 0
            continue
        y = a[nn - 1][nn - 1]
        w = a[nn][nn - 1] * a[nn - 1][nn]
        if l == nn - 1:
            p = 0.5 * (y - x)
            q = p * p + w
            z = math.sqrt(abs(q))
            x += t
            if q >= 0.0:
                z = p + math.copysign(z, p)
                wr[nn - 1] = wr[nn] = x + z
                if z != 0.0:
                    wr[nn] = x - w / z
                wi[nn - 1] = wi[nn] = 0.0
            else:
                wr[nn - 1] = wr[nn] = x + p
                wi[nn - 1] = -z
                wi[nn] = z
            nn -= 2
            its = 0
            continue
        if total >= limit:
            return np.array(wr), np.array(wi), False
        if its == 10 or its == 20:
            # exceptional shift
            t += x
            for i in range(nn + 1):
                a[i][i] -= x
            s = abs(a[nn][nn - 1]) + abs(a[nn - 1][nn - 2])
            x = y = 0.75 * s
            w = -0.4375 * s * s
        its += 1
        total += 1
        m = nn - 2
        while m >= l:
            z = a[m][m]
            r = x - z
            s = y - z
            p = (r * s - w) / a[m + 1][m] + a[m][m + 1]
            q = a[m + 1][m + 1] - z - r - s
            r = a[m + 2][m + 1]
            s = abs(p) + abs(q) + abs(r)
            p /= s
            q /= s
            r /= s
            if m == l:
                break
            u = abs(a[m][m - 1]) * (abs(q) + abs(r))
            v = abs(p) * (abs(a[m - 1][m - 1]) + abs(z) + abs(a[m + 1][m + 1]))
            if u + v == v:
                break
            m -= 1
        for i in range(m + 2, nn + 1):
            a[i][i - 2] = 0.0
            if i != m + 2:
                a[i][i - 3] = 0.0
        for k in range(m, nn):
            if k != m:
                p = a[k][k - 1]
                q = a[k + 1][k - 1]
                r = a[k + 2][k - 1] if k != nn - 1 else 0.0
                x = abs(p) + abs(q) + abs(r)
                if x != 0.0:
                    p /= x
                    q /= x
                    r /= x
            s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
            if s == 0.0:
                continue
            if k == m:
                if l != m:
                    a[k][k - 1] = -a[k][k - 1]
            else:
                a[k][k - 1] = -s * x
            p += s
            x = p / s
            y = q / s
            z = r / s
            q /= p
            r /= p
            rk, rk1 = a[k], a[k + 1]
            rk2 = a[k + 2] if k != nn - 1 else None
            for j in range(k, nn + 1):
                p = rk[j] + q * rk1[j]
                if rk2 is not None:
                    p += r * rk2[j]
                    rk2[j] -= p * z
                rk1[j] -= p * y
                rk[j] -= p * x
            mmin = nn if nn < k + 3 else k + 3
            for i in range(l, mmin + 1):
                ri = a[i]
                p = x * ri[k] + y * ri[k + 1]
                if rk2 is not None:
                    p += z * ri[k + 2]
                    ri[k + 2] -= p * r
                ri[k + 1] -= p * q
                ri[k] -= p
    return np.array(wr), np.array(wi), True


def sweep_poly2d(kind, coeffs, starts, h1x, h1y, h2x, h2y, tol_grad, consecutive, max_iters,
                 blowup, centers, pmats, levels, cycle_window, cycle_tol):
    """Iterate the GEG map from every start point of a 2-D polynomial problem.

    Vectorised over start points; every cell follows exactly the per-cell
    rules of the compiled kernel. Returns ``(codes, points, iters, gnorms)``;
    ``codes >= CAPTURED`` means captured by attractor ``code - CAPTURED``.
    """
    c = tuple(float(v) for v in coeffs)
    starts = np.asarray(starts, dtype=float)
    n = starts.shape[0]
    codes = np.full(n, -1, dtype=np.int64)
    points = starts.copy()
    iters = np.zeros(n, dtype=np.int64)
    gnorms = np.zeros(n)
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    pmats = np.asarray(pmats, dtype=float).reshape(-1, 4)
    levels = np.asarray(levels, dtype=float).ravel()

    idx = np.arange(n)
    x = starts[:, 0].copy()
    y = starts[:, 1].copy()
    consec = np.zeros(n, dtype=np.int64)
    window = max(int(cycle_window), 0)
    ring = np.zeros((window, n, 2)) if window else None
    k = 0
    while idx.size:
        with np.errstate(invalid="ignore", over="ignore"):
            gx, gy = _poly2d.grad(kind, c, x, y)
            gn = np.sqrt(gx * gx + gy * gy)
        done = np.zeros(idx.size, dtype=bool)
        code = np.full(idx.size, -1, dtype=np.int64)

        with np.errstate(invalid="ignore", over="ignore"):
            bad = ~(np.isfinite(x) & np.isfinite(y) & np.isfinite(gn)) | (np.sqrt(x * x + y * y) > blowup)
        code[bad] = DIVERGED
        done |= bad

        consec = np.where(gn <= tol_grad, consec + 1, 0)
        conv = ~done & (consec >= consecutive)
        code[conv] = CONVERGED
        done |= conv

        for j in range(levels.size):
            dx = x - centers[j, 0]
            dy = y - centers[j, 1]
            pm = pmats[j]
            with np.errstate(invalid="ignore", over="ignore"):
                v = dx * (pm[0] * dx + pm[1] * dy) + dy * (pm[2] * dx + pm[3] * dy)
            cap = ~done & (v <= levels[j])
            code[cap] = CAPTURED + j
            done |= cap

        if k >= max_iters:
            rest = ~done
            cyc = np.zeros(idx.size, dtype=bool)
            if window and k > 0:
                filled = min(window, k)
                for s in range(filled):
                    ddx = x - ring[s, idx, 0]
                    ddy = y - ring[s, idx, 1]
                    cyc |= np.sqrt(ddx * ddx + ddy * ddy) <= cycle_tol
            code[rest & cyc] = CYCLE
            code[rest & ~cyc] = MAX_ITERS
            done[:] = True

        if done.any():
            fin = idx[done]
            codes[fin] = code[done]
            points[fin, 0] = x[done]
            points[fin, 1] = y[done]
            iters[fin] = k
            gnorms[fin] = gn[done]
            keep = ~done
            idx, x, y, gx, gy, consec = idx[keep], x[keep], y[keep], gx[keep], gy[keep], consec[keep]
            if not idx.size:
                break

        if window and k >= max_iters - window:
            slot = k % window
            ring[slot, idx, 0] = x
            ring[slot, idx, 1] = y

        with np.errstate(invalid="ignore", over="ignore"):
            xh = x - h1x * gx
            yh = y + h1y * gy
            gxh, gyh = _poly2d.grad(kind, c, xh, yh)
            x = x - h2x * gxh
            y = y + h2y * gyh
        k += 1
    return codes, points, iters, gnorms
