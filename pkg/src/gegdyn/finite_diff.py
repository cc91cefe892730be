"""Central finite differences used as derivative fallbacks and as test oracles."""

import numpy as np

REL_STEP = 1e-6


def _steps(z, rel):
    return rel * np.maximum(1.0, np.abs(z))


def gradient(fun, z, rel_step=REL_STEP):
    """Central-difference gradient of a scalar function."""
    z = np.asarray(z, dtype=float)
    h = _steps(z, rel_step)
    g = np.empty_like(z)
    zp = z.copy()
    for i in range(z.size):
        zp[i] = z[i] + h[i]
        fp = fun(zp)
        zp[i] = z[i] - h[i]
        fm = fun(zp)
        zp[i] = z[i]
        g[i] = (fp - fm) / (2.0 * h[i])
    return g


def jacobian(fun, z, rel_step=REL_STEP):
    """Central-difference Jacobian of a vector map; column ``j`` is d fun / d z_j."""
    z = np.asarray(z, dtype=float)
    h = _steps(z, rel_step)
    cols = []
    zp = z.copy()
    for j in range(z.size):
        zp[j] = z[j] + h[j]
        fp = np.asarray(fun(zp), dtype=float)
        zp[j] = z[j] - h[j]
        fm = np.asarray(fun(zp), dtype=float)
        zp[j] = z[j]
        cols.append((fp - fm) / (2.0 * h[j]))
    return np.column_stack(cols)


def hessian_from_values(fun, z, rel_step=None):
    """Second-order central differences of a scalar function.

    Only used when neither an analytic gradient nor Hessian exists; the
    default step ``eps**(1/4)`` balances truncation against cancellation.
    """
    z = np.asarray(z, dtype=float)
    if rel_step is None:
        rel_step = np.finfo(float).eps ** 0.25
    h = _steps(z, rel_step)
    d = z.size
    out = np.empty((d, d))
    f0 = fun(z)
    zp = z.copy()
    for i in range(d):
        zp[i] = z[i] + h[i]
        fp = fun(zp)
        zp[i] = z[i] - h[i]
        fm = fun(zp)
        zp[i] = z[i]
        out[i, i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i])
        for j in range(i + 1, d):
            vals = []
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                zp[i] = z[i] + si * h[i]
                zp[j] = z[j] + sj * h[j]
                vals.append(fun(zp))
            zp[i] = z[i]
            zp[j] = z[j]
            out[i, j] = out[j, i] = (vals[0] - vals[1] - vals[2] + vals[3]) / (4.0 * h[i] * h[j])
    return out


def relative_error(approx, reference):
    """``||approx - reference|| / max(||reference||, 1)`` in the 2-norm."""
    approx = np.asarray(approx, dtype=float)
    reference = np.asarray(reference, dtype=float)
    return float(np.linalg.norm(approx - reference) / max(np.linalg.norm(reference), 1.0))
