"""Region-of-attraction estimates on 2-D grids of initial conditions."""

from __future__ import annotations

import csv
import json
import threading
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import _backend, analysis, spectral
from .calculus import GegConfig, OperatorBundle, Variant, make_operators
from .dynamics import Attractor, IterationBudget, Status, iterate
from .problems import MinMaxProblem

SNAP_RADIUS = 1e-3

# negative labels for cells that did not converge
LABEL_DIVERGED = -1
LABEL_MAX_ITERS = -2
LABEL_CYCLE = -3
LABEL_NAMES = {LABEL_DIVERGED: "Diverged", LABEL_MAX_ITERS: "MaxIters", LABEL_CYCLE: "CycleSuspected"}

_CODE_TO_LABEL = {1: LABEL_DIVERGED, 2: LABEL_MAX_ITERS, 3: LABEL_CYCLE}
_STATUS_TO_LABEL = {Status.DIVERGED: LABEL_DIVERGED, Status.MAX_ITERS: LABEL_MAX_ITERS,
                    Status.CYCLE_SUSPECTED: LABEL_CYCLE}


@dataclass
class BasinGrid:
    box: tuple
    resolution: tuple
    labels: np.ndarray          # (ny, nx); >= 0 indexes ``equilibria``
    iterations: np.ndarray      # (ny, nx)
    equilibria: List[np.ndarray] = field(default_factory=list)
    captured: Optional[np.ndarray] = None

    @property
    def xs(self) -> np.ndarray:
        return cell_centers(self.box[0], self.resolution[0])

    @property
    def ys(self) -> np.ndarray:
        return cell_centers(self.box[1], self.resolution[1])

    def counts(self) -> dict:
        vals, cnt = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, cnt)}

    def label_of(self, point, radius=SNAP_RADIUS) -> Optional[int]:
        for i, e in enumerate(self.equilibria):
            if np.linalg.norm(np.asarray(point, dtype=float) - e) <= radius:
                return i
        return None

    def cell_count(self, point) -> int:
        i = self.label_of(point)
        return 0 if i is None else int(np.sum(self.labels == i))


def cell_centers(interval, count) -> np.ndarray:
    lo, hi = interval
    return lo + (np.arange(count) + 0.5) * (hi - lo) / count


def _increment(bundle: OperatorBundle, z) -> np.ndarray:
    """``w(z) - z`` without forming ``w(z)`` first."""
    fz = bundle.field_F(z)
    if bundle.is_gda:
        return -bundle.h1 * fz
    return -bundle.h2 * bundle.field_F(z - bundle.h1 * fz)


_CERT_LEVELS = (1.0, 0.8, 0.6, 0.4, 0.2, 0.1, 0.05, 0.01)
_CERT_ANGLES = 64


def capture_attractor(bundle: OperatorBundle, center, exclude=(), max_radius=0.5,
                      halvings=12) -> Optional[Attractor]:
    """Quadratic sublevel set around a stable equilibrium that the map enters
    and never leaves.

    ``P`` solves ``J^T P J - P = -I`` for the Jacobian at ``center`` (written
    in terms of ``J - I`` to keep precision when ``J`` is close to the
    identity). The level is shrunk until the exact one-step change of
    ``V(z) = (z - c)^T P (z - c)`` is negative on sampled nested ellipses.
    Returns ``None`` for non-stable centres or when no radius passes.
    """
    c = np.asarray(center, dtype=float)
    d = c.size
    a = bundle.jac_J_minus_identity(c)
    if not spectral.classify(spectral.eigenvalues(np.eye(d) + a)).stable:
        return None
    at = a.T
    eye = np.eye(d)
    lhs = np.kron(eye, at) + np.kron(at, eye) + np.kron(at, at)
    try:
        p = np.linalg.solve(lhs, -eye.reshape(-1, order="F")).reshape(d, d, order="F")
    except np.linalg.LinAlgError:
        return None
    p = 0.5 * (p + p.T)
    evals, evecs = np.linalg.eigh(p)
    if evals[0] <= 0.0:
        return None
    radius = max_radius
    for e in exclude:
        dist = np.linalg.norm(np.asarray(e, dtype=float) - c)
        if dist > 0.0:
            radius = min(radius, 0.25 * dist)
    # directions on the unit V-sphere (2-D: angles; otherwise seeded samples)
    if d == 2:
        th = 2.0 * np.pi * np.arange(_CERT_ANGLES) / _CERT_ANGLES
        u = np.stack([np.cos(th), np.sin(th)], axis=1)
    else:
        u = np.random.default_rng(0).normal(size=(_CERT_ANGLES * d, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
    u = (u / np.sqrt(evals)) @ evecs.T
    for _ in range(halvings + 1):
        level = radius * radius * evals[0]
        if _decreases(bundle, c, p, u, level):
            return Attractor(c.copy(), p, float(level))
        radius *= 0.5
    return None


def _decreases(bundle, c, p, u, level) -> bool:
    for frac in _CERT_LEVELS:
        for dz in u * np.sqrt(frac * level):
            step = _increment(bundle, c + dz)
            if not np.all(np.isfinite(step)) or step @ p @ (2.0 * dz + step) >= 0.0:
                return False
    return True


def _legend(problem, box, seed, starts):
    lo = np.array([box[0][0], box[1][0]], dtype=float)
    hi = np.array([box[0][1], box[1][1]], dtype=float)
    pad = 0.5 * (hi - lo)
    search = np.stack([lo - pad, hi + pad], axis=1)
    return analysis.find_critical_points(problem, search, starts=starts, seed=seed)


def _register(equilibria, problem, point):
    for i, e in enumerate(equilibria):
        if np.linalg.norm(point - e) <= SNAP_RADIUS:
            return i
    z = analysis.newton_refine(problem, point)
    z = point if z is None else z
    for i, e in enumerate(equilibria):
        if np.linalg.norm(z - e) <= SNAP_RADIUS:
            return i
    equilibria.append(np.array(z, dtype=float))
    return len(equilibria) - 1


def _kernel_sweep(problem, config, starts, budget, attractors, workers):
    kind, coeffs = problem.kernel
    if attractors:
        centers = np.array([a.center for a in attractors])
        pmats = np.array([a.P.reshape(-1) for a in attractors])
        levels = np.array([a.level for a in attractors])
    else:
        centers, pmats, levels = np.zeros((0, 2)), np.zeros((0, 4)), np.zeros(0)
    h2x, h2y = (config.h1x, config.h1y) if config.variant is Variant.GDA else (config.h2x, config.h2y)
    h1x, h1y = (0.0, 0.0) if config.variant is Variant.GDA else (config.h1x, config.h1y)
    # GDA is the GEG step with a zero look-ahead: z+ = z - h F(z)
    args = (kind, coeffs, starts, h1x, h1y, h2x, h2y, budget.tol_grad, budget.consecutive,
            budget.max_iters, budget.blowup_radius, centers, pmats, levels,
            budget.cycle_window, budget.cycle_tol)
    n = starts.shape[0]
    if workers <= 1 or _backend.NAME != "compiled" or n < 2 * workers:
        return _backend.sweep_poly2d(*args)
    out = (np.full(n, -1, dtype=np.int64), np.array(starts, copy=True),
           np.zeros(n, dtype=np.int64), np.zeros(n))
    bounds = np.linspace(0, n, workers + 1).astype(int)
    threads = [threading.Thread(target=_backend.sweep_poly2d, args=args,
                                kwargs=dict(lo=int(lo), hi=int(hi), out=out))
               for lo, hi in zip(bounds[:-1], bounds[1:])]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    return out


def sweep(problem: MinMaxProblem, config: GegConfig, box, resolution,
          budget: IterationBudget = IterationBudget(), workers=1, seed=0,
          legend_starts=500, accelerate=True) -> BasinGrid:
    """Label every cell centre of ``box`` by the equilibrium its trajectory reaches.

    ``box`` is ``((xlo, xhi), (ylo, yhi))`` and ``resolution`` is ``(nx, ny)``.
    The legend is seeded with the critical points found in a box padded by
    half its size. With ``accelerate`` every asymptotically stable legend
    point gets a capture set (see :func:`capture_attractor`); unstable points
    never do, so a cell can only be labelled by one of them through ordinary
    convergence. Polynomial builtins run through the compiled sweep kernel;
    other problems fall back to :func:`dynamics.iterate` per cell.
    """
    if problem.n != 1 or problem.m != 1:
        raise ValueError("basin sweeps need a 2-D problem (n = m = 1)")
    nx, ny = (int(v) for v in resolution)
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be at least 2x2")
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    if len(box) != 2 or any(hi <= lo for lo, hi in box):
        raise ValueError("box must be ((xlo, xhi), (ylo, yhi)) with lo < hi")
    if workers < 1:
        raise ValueError("workers must be >= 1")

    equilibria = [np.array(p, dtype=float) for p in _legend(problem, box, seed, legend_starts)]
    bundle = make_operators(problem, config)
    attractors, owners = [], []
    if accelerate:
        for i, e in enumerate(equilibria):
            att = capture_attractor(bundle, e, exclude=[q for j, q in enumerate(equilibria) if j != i])
            if att is not None:
                attractors.append(att)
                owners.append(i)

    xs = cell_centers(box[0], nx)
    ys = cell_centers(box[1], ny)
    gx, gy = np.meshgrid(xs, ys)
    starts = np.ascontiguousarray(np.stack([gx.ravel(), gy.ravel()], axis=1))
    labels = np.empty(starts.shape[0], dtype=np.int64)
    iters = np.empty(starts.shape[0], dtype=np.int64)
    captured = np.zeros(starts.shape[0], dtype=bool)

    if problem.kernel is not None:
        codes, points, its, _ = _kernel_sweep(problem, config, starts, budget, attractors, workers)
        iters[:] = its
        for cell in range(starts.shape[0]):
            code = int(codes[cell])
            if code >= 10:
                labels[cell] = owners[code - 10]
                captured[cell] = True
            elif code == 0:
                labels[cell] = _register(equilibria, problem, points[cell])
            else:
                labels[cell] = _CODE_TO_LABEL[code]
    else:
        cell_budget = IterationBudget(**{**budget.__dict__, "store_iterates": False,
                                         "stride": max(budget.max_iters, 1)})
        for cell, z0 in enumerate(starts):
            # diverging cells overflow on the way out; the verdict records it
            with np.errstate(over="ignore", invalid="ignore"):
                tr = iterate(bundle, z0, cell_budget, attractors)
            iters[cell] = tr.iterations
            v = tr.verdict
            if v.status is Status.CONVERGED:
                if v.captured:
                    j = next(j for j, a in enumerate(attractors) if np.array_equal(a.center, v.point))
                    labels[cell] = owners[j]
                    captured[cell] = True
                else:
                    labels[cell] = _register(equilibria, problem, v.point)
            else:
                labels[cell] = _STATUS_TO_LABEL[v.status]
    return BasinGrid(box, (nx, ny), labels.reshape(ny, nx), iters.reshape(ny, nx),
                     equilibria, captured.reshape(ny, nx))


class MissingReportError(ValueError):
    pass


def unstable_mass(grid: BasinGrid, reports: Sequence[analysis.EquilibriumReport]) -> float:
    """Fraction of cells labelled by an equilibrium whose report says Unstable."""
    used = sorted(int(v) for v in np.unique(grid.labels) if v >= 0)
    unstable = set()
    for i in used:
        match = [r for r in reports if np.linalg.norm(r.location - grid.equilibria[i]) <= SNAP_RADIUS]
        if not match:
            raise MissingReportError(f"no report for legend equilibrium {i} at {grid.equilibria[i]}")
        if match[0].stability.stability is spectral.Stability.UNSTABLE:
            unstable.add(i)
    if grid.labels.size == 0:
        return 0.0
    return float(np.isin(grid.labels, list(unstable)).sum()) / grid.labels.size


def legend_reports(problem, config, grid: BasinGrid):
    return [analysis.report(problem, config, e) for e in grid.equilibria]


def write_grid_csv(grid: BasinGrid, path) -> None:
    xs, ys = grid.xs, grid.ys
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "label", "iterations"])
        for j, y in enumerate(ys):
            for i, x in enumerate(xs):
                w.writerow([repr(float(x)), repr(float(y)), int(grid.labels[j, i]), int(grid.iterations[j, i])])


def legend_dict(grid: BasinGrid, reports=None) -> dict:
    counts = grid.counts()
    rows = []
    for i, e in enumerate(grid.equilibria):
        row = {"label": i, "point": [float(v) for v in e], "cells": counts.get(i, 0)}
        if reports is not None:
            row["stability"] = reports[i].stability.stability.value
        rows.append(row)
    return {
        "box": [list(b) for b in grid.box],
        "resolution": list(grid.resolution),
        "equilibria": rows,
        "other_labels": {str(k): v for k, v in LABEL_NAMES.items()},
        "other_counts": {LABEL_NAMES[k]: counts.get(k, 0) for k in LABEL_NAMES},
    }


def write_legend_json(grid: BasinGrid, path, reports=None) -> None:
    with open(path, "w") as fh:
        json.dump(legend_dict(grid, reports), fh, indent=2, sort_keys=True)
        fh.write("\n")
