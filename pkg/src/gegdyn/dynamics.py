"""Running the discrete-time system ``z+ = w(z)``."""

from __future__ import annotations

import csv
import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .calculus import DivergenceError, GegConfig, OperatorBundle, make_operators
from .problems import ErmInstance, erm_objective, erm_start


@dataclass(frozen=True)
class IterationBudget:
    max_iters: int = 1_000_000
    tol_grad: float = 1e-8
    blowup_radius: float = 1e8
    consecutive: int = 5
    cycle_window: int = 64
    cycle_tol: float = 1e-10
    stride: int = 1
    store_iterates: bool = True

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if not (self.tol_grad > 0 and self.blowup_radius > 0):
            raise ValueError("tol_grad and blowup_radius must be positive")
        if self.consecutive < 1 or self.stride < 1:
            raise ValueError("consecutive and stride must be >= 1")


class Status(str, enum.Enum):
    CONVERGED = "ConvergedTo"
    DIVERGED = "Diverged"
    MAX_ITERS = "MaxIters"
    CYCLE_SUSPECTED = "CycleSuspected"


@dataclass(frozen=True)
class Verdict:
    status: Status
    point: Optional[np.ndarray] = None
    captured: bool = False

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    def __str__(self):
        if self.point is None:
            return self.status.value
        return f"{self.status.value}({', '.join(f'{v:.6g}' for v in self.point)})"


@dataclass(frozen=True)
class Attractor:
    """Sublevel set ``(z - c)^T P (z - c) <= level`` known to flow into ``c``.

    A trajectory entering the set is declared converged to ``center``
    without iterating the remaining (possibly very slow) approach.
    """

    center: np.ndarray
    P: np.ndarray
    level: float

    def contains(self, z) -> bool:
        d = np.asarray(z, dtype=float) - self.center
        return bool(d @ self.P @ d <= self.level)


@dataclass
class Trace:
    grad_norms: np.ndarray
    steps: np.ndarray
    verdict: Verdict
    iterations: int
    iterates: Optional[np.ndarray] = None
    final_point: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def final_grad_norm(self) -> float:
        return float(self.grad_norms[-1])

    def summary(self) -> dict:
        return {
            "verdict": self.verdict.status.value,
            "captured": self.verdict.captured,
            "final_point": [float(v) for v in self.final_point],
            "final_grad_norm": self.final_grad_norm,
            "iterations": int(self.iterations),
        }


def iterate(bundle: OperatorBundle, z0, budget: IterationBudget = IterationBudget(),
            attractors: Sequence[Attractor] = ()) -> Trace:
    """Iterate ``w`` from ``z0`` until a termination rule fires.

    Order of checks at each iterate ``z_k``: divergence (non-finite or
    ``||z_k|| > blowup_radius``); ``||grad f(z_k)|| <= tol_grad`` for
    ``consecutive`` successive iterates; entry into an attractor set; and
    finally ``k == max_iters``, reported as CycleSuspected when ``z_k`` is
    within ``cycle_tol`` of one of the previous ``cycle_window`` iterates.
    """
    z = np.array(z0, dtype=float)
    if z.shape != (bundle.dim,):
        raise ValueError(f"z0 has shape {z.shape}, expected ({bundle.dim},)")
    norms, steps, stored = [], [], []
    recent = deque(maxlen=max(budget.cycle_window, 1))
    consec = 0
    k = 0
    fz = None
    while True:
        try:
            fz = bundle.field_F(z) if np.all(np.isfinite(z)) else np.full_like(z, np.nan)
        except (FloatingPointError, OverflowError):
            fz = np.full_like(z, np.nan)
        with np.errstate(over="ignore", invalid="ignore"):
            gn = float(np.linalg.norm(fz))
        last = False
        verdict = None
        if not (np.all(np.isfinite(z)) and np.isfinite(gn)) or np.linalg.norm(z) > budget.blowup_radius:
            verdict = Verdict(Status.DIVERGED)
        if verdict is None:
            consec = consec + 1 if gn <= budget.tol_grad else 0
            if consec >= budget.consecutive:
                verdict = Verdict(Status.CONVERGED, z.copy())
        if verdict is None:
            for att in attractors:
                if att.contains(z):
                    verdict = Verdict(Status.CONVERGED, np.array(att.center, dtype=float), captured=True)
                    break
        if verdict is None and k >= budget.max_iters:
            cyc = budget.cycle_window > 0 and any(
                np.linalg.norm(z - prev) <= budget.cycle_tol for prev in recent)
            verdict = Verdict(Status.CYCLE_SUSPECTED if cyc else Status.MAX_ITERS)
        last = verdict is not None
        if last or k % budget.stride == 0:
            norms.append(gn)
            steps.append(k)
            if budget.store_iterates:
                stored.append(z.copy())
        if last:
            break
        if budget.cycle_window > 0 and k >= budget.max_iters - budget.cycle_window:
            recent.append(z.copy())
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                z = bundle.step_from_field(z, fz)
        except DivergenceError:
            z = np.full_like(z, np.nan)
        k += 1
    return Trace(
        grad_norms=np.array(norms),
        steps=np.array(steps, dtype=np.int64),
        verdict=verdict,
        iterations=k,
        iterates=np.array(stored) if budget.store_iterates else None,
        final_point=z.copy(),
    )


def kfold_rows(n_rows: int, folds: int, seed: int):
    """Seeded k-fold partition; returns the training rows of each fold."""
    if folds < 2:
        raise ValueError("k-fold needs at least 2 folds")
    perm = np.random.default_rng(seed).permutation(n_rows)
    parts = np.array_split(perm, folds)
    return [np.sort(np.concatenate(parts[:i] + parts[i + 1:])) for i in range(folds)]


def run_erm(instance: ErmInstance, config: GegConfig, budget: IterationBudget,
            folds: int = 5, seed: Optional[int] = None):
    """Train the robust-ERM problem once per cross-validation fold.

    ``folds == 1`` trains on the instance's recorded train split; otherwise
    every row is assigned to one of ``folds`` parts and each fold trains on
    the remaining parts. Returns one :class:`Trace` per fold.
    """
    n_rows = instance.features.shape[0]
    if folds < 1 or folds > n_rows:
        raise ValueError(f"folds must be in [1, {n_rows}], got {folds}")
    seed = instance.seed if seed is None else seed
    row_sets = [instance.train_index] if folds == 1 else kfold_rows(n_rows, folds, seed)
    traces = []
    for rows in row_sets:
        problem = erm_objective(instance, rows)
        bundle = make_operators(problem, config)
        traces.append(iterate(bundle, erm_start(instance, problem.m), budget))
    return traces


def write_trace_csv(trace: Trace, path, include_z=False) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["iter", "grad_norm"]
        if include_z and trace.iterates is not None:
            header += [f"z{i}" for i in range(trace.iterates.shape[1])]
        w.writerow(header)
        for i, (k, g) in enumerate(zip(trace.steps, trace.grad_norms)):
            row = [int(k), repr(float(g))]
            if len(header) > 2:
                row += [repr(float(v)) for v in trace.iterates[i]]
            w.writerow(row)
