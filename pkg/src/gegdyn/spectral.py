"""Dense eigenvalues and fixed-point stability classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _backend

MAX_DIM = 500
DEFAULT_TOL_UNIT = 1e-9


class CapacityError(ValueError):
    pass


class EigenConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    spectral_radius: float
    method: str

    def __len__(self):
        return self.eigenvalues.size

    def pairs(self):
        """Eigenvalues as ``[re, im]`` lists (for JSON)."""
        return [[float(v.real), float(v.imag)] for v in self.eigenvalues]


def _balance(a):
    # Parlett-Reinsch scaling by powers of two; leaves eigenvalues unchanged exactly.
    radix = 2.0
    sqrdx = radix * radix
    n = a.shape[0]
    for _ in range(100):
        done = True
        for i in range(n):
            c = np.abs(a[:, i]).sum() - abs(a[i, i])
            r = np.abs(a[i, :]).sum() - abs(a[i, i])
            if c == 0.0 or r == 0.0:
                continue
            g = r / radix
            f = 1.0
            s = c + r
            while c < g:
                f *= radix
                c *= sqrdx
            g = r * radix
            while c > g:
                f /= radix
                c /= sqrdx
            if (c + r) / f < 0.95 * s:
                done = False
                a[i, :] /= f
                a[:, i] *= f
        if done:
            break
    return a


def _hessenberg(a):
    n = a.shape[0]
    for k in range(n - 2):
        x = a[k + 1:, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        v = x.copy()
        v[0] += np.copysign(alpha, x[0])
        vn = np.linalg.norm(v)
        if vn == 0.0:
            continue
        v /= vn
        a[k + 1:, k:] -= 2.0 * np.outer(v, v @ a[k + 1:, k:])
        a[:, k + 1:] -= 2.0 * np.outer(a[:, k + 1:] @ v, v)
        a[k + 2:, k] = 0.0
    return a


def _closed_form(a):
    if a.shape[0] == 1:
        return np.array([complex(a[0, 0])])
    (p, q), (r, s) = a
    half_tr = 0.5 * (p + s)
    disc = (0.5 * (p - s)) ** 2 + q * r
    if disc >= 0.0:
        root = np.sqrt(disc)
        big = half_tr + np.copysign(root, half_tr) if half_tr != 0.0 else root
        det = p * s - q * r
        # avoid cancellation in the smaller root
        small = det / big if big != 0.0 else half_tr - root
        return np.array([complex(big), complex(small)])
    root = np.sqrt(-disc)
    return np.array([complex(half_tr, root), complex(half_tr, -root)])


def _order(vals):
    return vals[np.lexsort((-vals.imag, vals.real))]


def eigenvalues(matrix, name="matrix") -> Spectrum:
    """All eigenvalues of a real square matrix (dimension 1..500).

    Uses the quadratic formula for d <= 2 and balancing, Householder
    Hessenberg reduction and Francis double-shift QR otherwise.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError(f"{name}: expected a non-empty square matrix, got shape {a.shape}")
    d = a.shape[0]
    if d > MAX_DIM:
        raise CapacityError(f"{name}: dimension {d} exceeds the eigensolver limit {MAX_DIM}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name}: matrix has non-finite entries")
    if d <= 2:
        vals = _closed_form(a)
        method = "closed-form"
    else:
        h = _hessenberg(_balance(a))
        wr, wi, ok = _backend.hqr_eigenvalues(np.ascontiguousarray(h))
        if not ok:
            raise EigenConvergenceError(f"{name}: QR iteration did not converge within {30 * d} sweeps")
        vals = wr + 1j * wi
        method = "hqr"
    vals = _order(np.asarray(vals, dtype=complex))
    return Spectrum(vals, float(np.max(np.abs(vals))), method)


class Stability(str, enum.Enum):
    ASYMPTOTICALLY_STABLE = "AsymptoticallyStable"
    UNSTABLE = "Unstable"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class StabilityClass:
    stability: Stability
    margin: float
    spectral_radius: float

    @property
    def stable(self) -> bool:
        return self.stability is Stability.ASYMPTOTICALLY_STABLE


def classify(spectrum, tol_unit=DEFAULT_TOL_UNIT) -> StabilityClass:
    """Stable if rho < 1 - tol_unit, unstable if rho > 1 + tol_unit, else no verdict."""
    if not tol_unit > 0:
        raise ValueError("tol_unit must be positive")
    rho = spectrum.spectral_radius if isinstance(spectrum, Spectrum) else float(spectrum)
    if rho < 1.0 - tol_unit:
        cls = Stability.ASYMPTOTICALLY_STABLE
    elif rho > 1.0 + tol_unit:
        cls = Stability.UNSTABLE
    else:
        cls = Stability.INCONCLUSIVE
    return StabilityClass(cls, abs(rho - 1.0), rho)


class Definiteness(str, enum.Enum):
    POS_DEF = "PosDef"
    POS_SEMIDEF = "PosSemiDef"
    NEG_DEF = "NegDef"
    NEG_SEMIDEF = "NegSemiDef"
    SEMIDEF_BOTH = "PosSemiDef&NegSemiDef"
    INDEFINITE = "Indefinite"

    @property
    def is_psd(self) -> bool:
        return self in (Definiteness.POS_DEF, Definiteness.POS_SEMIDEF, Definiteness.SEMIDEF_BOTH)

    @property
    def is_nsd(self) -> bool:
        return self in (Definiteness.NEG_DEF, Definiteness.NEG_SEMIDEF, Definiteness.SEMIDEF_BOTH)


def symmetric_eigenvalues(matrix, tol=1e-10) -> np.ndarray:
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.allclose(a, a.T, rtol=0.0, atol=tol * max(1.0, np.abs(a).max(initial=0.0))):
        raise ValueError("matrix is not symmetric")
    return np.sort(eigenvalues(0.5 * (a + a.T), name="symmetric matrix").eigenvalues.real)


def symmetric_definiteness(matrix) -> Definiteness:
    vals = symmetric_eigenvalues(matrix)
    thresh = 1e-9 * (1.0 + np.abs(vals).max(initial=0.0))
    pos = vals > thresh
    neg = vals < -thresh
    if pos.all():
        return Definiteness.POS_DEF
    if neg.all():
        return Definiteness.NEG_DEF
    if not pos.any() and not neg.any():
        return Definiteness.SEMIDEF_BOTH
    if not neg.any():
        return Definiteness.POS_SEMIDEF
    if not pos.any():
        return Definiteness.NEG_SEMIDEF
    return Definiteness.INDEFINITE


def match_distance(a, b) -> float:
    """Greedy nearest-pair distance between two eigenvalue multisets.

    Each element of ``a`` (largest modulus first) is paired with the nearest
    unused element of ``b``; returns the largest pair distance.
    """
    a = np.asarray(a, dtype=complex).ravel()
    b = list(np.asarray(b, dtype=complex).ravel())
    if a.size != len(b):
        raise ValueError(f"multisets differ in size: {a.size} vs {len(b)}")
    worst = 0.0
    for val in a[np.argsort(-np.abs(a), kind="stable")]:
        dists = [abs(val - other) for other in b]
        j = int(np.argmin(dists))
        worst = max(worst, dists[j])
        b.pop(j)
    return float(worst)


def closed_form_bilinear(eta, tau, gamma):
    """Eigenvalues of the extra-gradient Jacobian of f = xy at the origin."""
    re = 1.0 - gamma * eta * eta / tau
    im = gamma * eta / math.sqrt(tau)
    return np.array([complex(re, im), complex(re, -im)])
