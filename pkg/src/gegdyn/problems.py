"""Min-max problem definitions: the builtin benchmarks and the robust-ERM objective."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

from . import _poly2d, finite_diff

LEAKY_SLOPE = 0.01
PROB_CLAMP = 1e-12
TRAIN_FRACTION = 0.8
MIN_ROWS = 10

# (x^2, y^2, xy) coefficients of f1 and f2 in the multi-critical objective.
# The printed x^2 coefficient of f1 is -0.25, but the critical points and
# verdicts tabulated alongside it belong to -1/8; see ``multi_critical``.
MULTI_F1 = (-0.125, -0.5, 0.6)
MULTI_F1_PRINTED = (-0.25, -0.5, 0.6)
MULTI_F2 = (0.5, 0.5, 4.0)


class DataError(ValueError):
    """Raised when tabular input cannot be turned into an ERM instance."""


@dataclass(frozen=True)
class MinMaxProblem:
    """``min_x max_y f(x, y)`` over ``z = (x, y)`` with ``x`` in R^n, ``y`` in R^m.

    ``grad`` and ``hess`` are optional; :meth:`gradient` and :meth:`hessian`
    fall back to central differences when they are missing. ``kernel`` names
    a closed-form 2-D polynomial that the compiled sweep kernel can evaluate
    without calling back into Python.
    """

    n: int
    m: int
    eval: Callable[[np.ndarray], float]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lipschitz_hint: Optional[float] = None
    name: str = "custom"
    quadratic: bool = False
    kernel: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError(f"block dimensions must be >= 1, got n={self.n}, m={self.m}")
        if self.lipschitz_hint is not None and not self.lipschitz_hint > 0:
            raise ValueError("lipschitz_hint must be positive")

    @property
    def dim(self) -> int:
        return self.n + self.m

    def gradient(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.grad is not None:
            return np.asarray(self.grad(z), dtype=float)
        return finite_diff.gradient(self.eval, z)

    def hessian(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.hess is not None:
            return np.asarray(self.hess(z), dtype=float)
        if self.grad is not None:
            h = finite_diff.jacobian(self.grad, z)
            return 0.5 * (h + h.T)
        return finite_diff.hessian_from_values(self.eval, z)

    def split(self, z):
        z = np.asarray(z, dtype=float)
        return z[: self.n], z[self.n:]


def _poly_problem(kind, coeffs, name, lipschitz=None, quadratic=False):
    c = tuple(float(v) for v in coeffs)

    def f(z):
        return float(_poly2d.value(kind, c, z[0], z[1]))

    def g(z):
        gx, gy = _poly2d.grad(kind, c, z[0], z[1])
        return np.array([gx, gy], dtype=float)

    def h(z):
        fxx, fxy, fyy = _poly2d.hess(kind, c, z[0], z[1])
        return np.array([[fxx, fxy], [fxy, fyy]], dtype=float)

    return MinMaxProblem(1, 1, f, g, h, lipschitz_hint=lipschitz, name=name,
                         quadratic=quadratic, kernel=(kind, c))


def quadratic(hessian, n, m, name="quadratic", lipschitz_hint=None) -> MinMaxProblem:
    """``f(z) = z^T Q z / 2`` for a symmetric ``Q`` of size ``n + m``."""
    q = np.array(hessian, dtype=float)
    if q.shape != (n + m, n + m):
        raise ValueError(f"Hessian shape {q.shape} does not match n+m={n + m}")
    if not np.allclose(q, q.T, rtol=0, atol=1e-12):
        raise ValueError("quadratic Hessian must be symmetric")
    q = 0.5 * (q + q.T)
    q.setflags(write=False)
    if n == 1 and m == 1:
        return _poly_problem(_poly2d.QUADRATIC, (0.5 * q[0, 0], q[0, 1], 0.5 * q[1, 1]), name,
                             lipschitz=lipschitz_hint, quadratic=True)
    return MinMaxProblem(
        n, m,
        eval=lambda z: 0.5 * float(z @ q @ z),
        grad=lambda z: q @ z,
        hess=lambda z: q.copy(),
        lipschitz_hint=lipschitz_hint,
        name=name,
        quadratic=True,
    )


BUILTIN_NAMES = ("bilinear_xy", "multi_critical", "quadratic_counterexample")


def builtin(name: str) -> MinMaxProblem:
    """Return one of the shipped benchmark objectives.

    ``bilinear_xy``
        ``f = x y``; unique critical point (0, 0), L = 1.
    ``multi_critical``
        ``f = f1 (x-1)^2 (y-1)^2 + f2 x^2 y^2`` with
        ``f1 = -x^2/8 - y^2/2 + 0.6 x y`` and ``f2 = x^2/2 + y^2/2 + 4 x y``.
        Eight critical points; no global Lipschitz constant.
    ``quadratic_counterexample``
        ``f = -0.1 x^2 - 0.5 y^2 + 0.5 x y``; stable under extra-gradient
        yet not a saddle point. L = 1.25.
    """
    if name == "bilinear_xy":
        return _poly_problem(_poly2d.QUADRATIC, (0.0, 1.0, 0.0), name, lipschitz=1.0, quadratic=True)
    if name == "multi_critical":
        return multi_critical()
    if name == "quadratic_counterexample":
        return _poly_problem(_poly2d.QUADRATIC, (-0.1, 0.5, -0.5), name, lipschitz=1.25, quadratic=True)
    raise KeyError(f"unknown builtin problem {name!r}; choose one of {', '.join(BUILTIN_NAMES)}")


def multi_critical(f1=MULTI_F1, f2=MULTI_F2, name="multi_critical") -> MinMaxProblem:
    """``f = f1 (x-1)^2 (y-1)^2 + f2 x^2 y^2`` with quadratic forms ``f1``, ``f2``
    given as ``(x^2, y^2, xy)`` coefficients.

    With the printed ``f1 = -0.25 x^2 - ...`` the origin is unstable and the
    critical points move, so the builtin uses -1/8, which recovers all eight
    tabulated points and their verdicts.
    """
    if len(f1) != 3 or len(f2) != 3:
        raise ValueError("f1 and f2 need three coefficients each")
    return _poly_problem(_poly2d.MULTI, tuple(f1) + tuple(f2), name)


# --------------------------------------------------------------------------
# Robust empirical risk minimisation


@dataclass(frozen=True)
class ErmInstance:
    """Standardized binary-classification data plus network settings.

    ``features``/``labels`` hold every row; ``train_index`` is the seeded
    80% split the objective trains on by default. ``theta0`` is the seeded
    initial parameter vector of the ``v -> hidden_width -> 1`` network.
    """

    features: np.ndarray
    labels: np.ndarray
    hidden_width: int
    alpha: float
    train_index: np.ndarray
    test_index: np.ndarray
    theta0: np.ndarray
    seed: int = 0

    @property
    def v(self) -> int:
        return self.features.shape[1]

    @property
    def n_params(self) -> int:
        return parameter_count(self.v, self.hidden_width)

    @property
    def m(self) -> int:
        return int(self.train_index.size)

    @property
    def data_points(self) -> np.ndarray:
        return self.features[self.train_index]

    @property
    def train_labels(self) -> np.ndarray:
        return self.labels[self.train_index]


def parameter_count(v: int, hidden: int) -> int:
    return (v + 1) * hidden + hidden + 1


def init_theta(v: int, hidden: int, rng: np.random.Generator) -> np.ndarray:
    w1 = rng.normal(0.0, 1.0 / np.sqrt(v), size=(hidden, v))
    b1 = rng.normal(0.0, 1.0 / np.sqrt(v), size=hidden)
    w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=hidden)
    b2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=1)
    return np.concatenate([w1.ravel(), b1, w2, b2])


def erm_from_arrays(features, labels, hidden_width=50, alpha=1.0, seed=0) -> ErmInstance:
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if x.ndim != 2 or x.shape[1] < 1:
        raise DataError("features must be a 2-D array with at least one column")
    if y.shape != (x.shape[0],):
        raise DataError(f"label count {y.size} does not match data count {x.shape[0]}")
    if x.shape[0] < MIN_ROWS:
        raise DataError(f"need at least {MIN_ROWS} rows, got {x.shape[0]}")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise DataError("labels must be 0 or 1")
    if not np.all(np.isfinite(x)):
        raise DataError("features must be finite")
    if hidden_width < 1 or not alpha > 0:
        raise DataError("hidden_width must be >= 1 and alpha > 0")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std == 0.0] = 1.0
    x = (x - mean) / std
    rng = np.random.default_rng(seed)
    perm = rng.permutation(x.shape[0])
    n_train = int(round(TRAIN_FRACTION * x.shape[0]))
    train = np.sort(perm[:n_train])
    test = np.sort(perm[n_train:])
    theta0 = init_theta(x.shape[1], hidden_width, rng)
    for arr in (x, y, train, test, theta0):
        arr.setflags(write=False)
    return ErmInstance(x, y, int(hidden_width), float(alpha), train, test, theta0, seed)


def _read_csv_rows(csv_source):
    if isinstance(csv_source, (str, os.PathLike)):
        with open(csv_source, newline="") as fh:
            return list(csv.reader(fh))
    if isinstance(csv_source, io.IOBase) or hasattr(csv_source, "read"):
        return list(csv.reader(csv_source))
    raise TypeError("csv_source must be a path or a text stream")


def load_erm(csv_source, hidden_width=50, alpha=1.0, seed=0, label_column="label") -> ErmInstance:
    """Read a headed CSV (one 0/1 label column, numeric features) into an instance."""
    rows = [r for r in _read_csv_rows(csv_source) if r]
    if not rows:
        raise DataError("CSV is empty")
    header = [h.strip() for h in rows[0]]
    if label_column not in header:
        raise DataError(f"missing label column {label_column!r}; header is {header}")
    li = header.index(label_column)
    body = rows[1:]
    if len(body) < MIN_ROWS:
        raise DataError(f"need at least {MIN_ROWS} data rows, got {len(body)}")
    if len(header) < 2:
        raise DataError("CSV has no feature columns")
    feats, labels = [], []
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
        vals = []
        for j, cell in enumerate(row):
            try:
                val = float(cell)
            except ValueError:
                raise DataError(f"line {lineno}, column {header[j]!r}: non-numeric cell {cell!r}") from None
            if j == li:
                if val not in (0.0, 1.0):
                    raise DataError(f"line {lineno}: label {cell!r} is not 0 or 1")
                labels.append(val)
            else:
                vals.append(val)
        feats.append(vals)
    return erm_from_arrays(np.array(feats), np.array(labels), hidden_width, alpha, seed)


def synthetic_blobs(rows=200, features=10, seed=0, separation=1.5):
    """Two overlapping Gaussian blobs; returns ``(X, y)``."""
    rng = np.random.default_rng(seed)
    y = (np.arange(rows) % 2).astype(float)
    rng.shuffle(y)
    centre = np.full(features, separation / np.sqrt(features))
    x = rng.normal(size=(rows, features)) + np.outer(2.0 * y - 1.0, centre)
    return x, y


def blobs_csv(rows=200, features=10, seed=0) -> str:
    x, y = synthetic_blobs(rows, features, seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{i}" for i in range(features)] + ["label"])
    for xi, yi in zip(x, y):
        w.writerow([repr(float(v)) for v in xi] + [int(yi)])
    return buf.getvalue()


def _unpack(theta, v, h):
    i = 0
    w1 = theta[i:i + h * v].reshape(h, v)
    i += h * v
    b1 = theta[i:i + h]
    i += h
    w2 = theta[i:i + h]
    i += h
    return w1, b1, w2, theta[i]


def _forward(theta, x, h):
    w1, b1, w2, b2 = _unpack(theta, x.shape[1], h)
    s1 = x @ w1.T + b1
    a1 = np.where(s1 > 0, s1, LEAKY_SLOPE * s1)
    s2 = a1 @ w2 + b2
    raw = expit(s2)
    yhat = np.clip(raw, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return s1, a1, raw, yhat


def erm_objective(instance: ErmInstance, rows=None) -> MinMaxProblem:
    """Robust-ERM min-max problem over ``z = (theta, p)``.

    ``f = sum_i p_i CE_i(theta) - alpha * sum_i (p_i - 1/m)^2`` where ``CE_i``
    is the (clamped) binary cross-entropy of row ``i``. ``rows`` selects the
    training rows; the recorded train split is used when omitted.
    """
    idx = instance.train_index if rows is None else np.asarray(rows)
    x = instance.features[idx]
    y = instance.labels[idx]
    h = instance.hidden_width
    n = parameter_count(x.shape[1], h)
    m = x.shape[0]
    alpha = instance.alpha
    inv_m = 1.0 / m

    def losses(yhat):
        return -(y * np.log(yhat) + (1.0 - y) * np.log1p(-yhat))

    def f(z):
        theta, p = z[:n], z[n:]
        _, _, _, yhat = _forward(theta, x, h)
        return float(p @ losses(yhat) - alpha * np.sum((p - inv_m) ** 2))

    def g(z):
        theta, p = z[:n], z[n:]
        w1, b1, w2, b2 = _unpack(theta, x.shape[1], h)
        s1, a1, raw, yhat = _forward(theta, x, h)
        active = (raw > PROB_CLAMP) & (raw < 1.0 - PROB_CLAMP)
        # d CE / d logit = yhat - y wherever the clamp is inactive
        delta = p * (yhat - y) * active
        g_w2 = a1.T @ delta
        g_b2 = delta.sum()
        d1 = np.outer(delta, w2) * np.where(s1 > 0, 1.0, LEAKY_SLOPE)
        g_w1 = d1.T @ x
        g_b1 = d1.sum(axis=0)
        g_p = losses(yhat) - 2.0 * alpha * (p - inv_m)
        return np.concatenate([g_w1.ravel(), g_b1, g_w2, [g_b2], g_p])

    return MinMaxProblem(n, m, f, g, None, name="erm")


def erm_start(instance: ErmInstance, m: int) -> np.ndarray:
    """Initial point: seeded network weights and uniform sample weights."""
    return np.concatenate([instance.theta0, np.full(m, 1.0 / m)])
