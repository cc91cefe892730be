"""Operators of the generalised extra-gradient map.

With ``F(z) = [grad_x f; -grad_y f]`` and per-block step vectors
``h1 = (h1x,..., h1y,...)`` and ``h2 = (h2x,..., h2y,...)`` the iteration is

    z_hat = z - h1 * F(z)
    z+    = z - h2 * F(z_hat)

which equals ``z - gamma eta Lambda_tau F(z - eta Lambda_tau F(z))`` for
``eta = h1y``, ``tau = h1y / h1x`` and ``gamma = h2x / h1x``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .problems import MinMaxProblem

_REL = 1e-12


class Variant(str, enum.Enum):
    GEG = "GEG"
    EG = "EG"
    TAU_EG = "TAU_EG"
    EG_PLUS = "EG_PLUS"
    GDA = "GDA"

    @classmethod
    def parse(cls, text: str) -> "Variant":
        key = text.strip().upper().replace("-", "_").replace("+", "_PLUS")
        aliases = {"TAUEG": "TAU_EG", "EGPLUS": "EG_PLUS", "EG_PLUS_PLUS": "EG_PLUS"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown variant {text!r}; choose from {[v.value for v in cls]}") from None


class DivergenceError(FloatingPointError):
    """A non-finite value appeared while evaluating the map; ``iterate`` holds the input."""

    def __init__(self, iterate, message="non-finite value in GEG map"):
        super().__init__(message)
        self.iterate = np.array(iterate, copy=True)


def _close(a, b, rel=_REL):
    return abs(a - b) <= rel * max(abs(a), abs(b))


@dataclass(frozen=True)
class GegConfig:
    h1x: float
    h1y: float
    h2x: float
    h2y: float
    variant: Variant = Variant.GEG

    def __post_init__(self):
        for name in ("h1x", "h1y", "h2x", "h2y"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be a positive finite step size, got {val}")
        object.__setattr__(self, "variant", Variant(self.variant))
        if not _close(self.h2y / self.h2x, self.h1y / self.h1x):
            raise ValueError("inconsistent steps: h2y/h2x must equal h1y/h1x (both define tau)")
        if not _close(self.h2y / self.h1y, self.h2x / self.h1x):
            raise ValueError("inconsistent steps: h2y/h1y must equal h2x/h1x (both define gamma)")
        v = self.variant
        if v in (Variant.EG, Variant.EG_PLUS) and not _close(self.tau, 1.0):
            raise ValueError(f"variant {v.value} requires tau = 1, got {self.tau}")
        if v in (Variant.EG, Variant.TAU_EG) and not _close(self.gamma, 1.0):
            raise ValueError(f"variant {v.value} requires gamma = 1, got {self.gamma}")

    @property
    def eta(self) -> float:
        return self.h1y

    @property
    def tau(self) -> float:
        return self.h1y / self.h1x

    @property
    def gamma(self) -> float:
        return self.h2x / self.h1x

    @classmethod
    def from_params(cls, eta, tau=1.0, gamma=1.0, variant=Variant.GEG) -> "GegConfig":
        variant = Variant(variant)
        if variant is Variant.GDA:
            gamma = 1.0
        if not (eta > 0 and tau > 0 and gamma > 0):
            raise ValueError(f"eta, tau, gamma must be positive, got {(eta, tau, gamma)}")
        h1x = eta / tau
        return cls(h1x=h1x, h1y=eta, h2x=gamma * h1x, h2y=gamma * eta, variant=variant)

    def as_variant(self, variant) -> "GegConfig":
        """Specialise this parameter set: TAU_EG forces gamma=1, EG_PLUS tau=1, EG both."""
        variant = Variant(variant)
        eta, tau, gamma = self.eta, self.tau, self.gamma
        if variant in (Variant.EG, Variant.EG_PLUS):
            tau = 1.0
        if variant in (Variant.EG, Variant.TAU_EG):
            gamma = 1.0
        return GegConfig.from_params(eta, tau, gamma, variant)

    def to_dict(self) -> dict:
        return {"variant": self.variant.value, "h1x": self.h1x, "h1y": self.h1y, "h2x": self.h2x,
                "h2y": self.h2y, "eta": self.eta, "tau": self.tau, "gamma": self.gamma}


@dataclass(frozen=True)
class OperatorBundle:
    problem: MinMaxProblem
    config: GegConfig
    h1: np.ndarray
    h2: np.ndarray

    @property
    def dim(self) -> int:
        return self.problem.dim

    @property
    def is_gda(self) -> bool:
        return self.config.variant is Variant.GDA

    def field_F(self, z) -> np.ndarray:
        g = np.array(self.problem.gradient(z), dtype=float)
        g[self.problem.n:] *= -1.0
        return g

    def scaling(self) -> np.ndarray:
        """The block-diagonal matrix diag(I / tau, I)."""
        tau = self.config.tau
        n, m = self.problem.n, self.problem.m
        return np.diag(np.concatenate([np.full(n, 1.0 / tau), np.ones(m)]))

    def jac_H(self, z) -> np.ndarray:
        """Derivative of -F: diag(-I, I) times the Hessian."""
        h = np.array(self.problem.hessian(z), dtype=float)
        h[: self.problem.n] *= -1.0
        return h

    def step_from_field(self, z, fz) -> np.ndarray:
        """w(z) given a precomputed F(z)."""
        if self.is_gda:
            return z - self.h1 * fz
        z_hat = z - self.h1 * fz
        if not np.all(np.isfinite(z_hat)):
            raise DivergenceError(z)
        return z - self.h2 * self.field_F(z_hat)

    def map_w(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = self.step_from_field(z, self.field_F(z))
        if not np.all(np.isfinite(out)):
            raise DivergenceError(z)
        return out

    def jac_J(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        eye = np.eye(self.dim)
        inner = eye + self.h1[:, None] * self.jac_H(z)
        if self.is_gda:
            return inner
        z_hat = z - self.h1 * self.field_F(z)
        return eye + (self.h2[:, None] * self.jac_H(z_hat)) @ inner

    def jac_J_minus_identity(self, z) -> np.ndarray:
        """``J(z) - I`` formed without the cancellation of subtracting I."""
        z = np.asarray(z, dtype=float)
        b = self.h1[:, None] * self.jac_H(z)
        if self.is_gda:
            return b
        z_hat = z - self.h1 * self.field_F(z)
        a = self.h2[:, None] * self.jac_H(z_hat)
        return a + a @ b


def make_operators(problem: MinMaxProblem, config: GegConfig) -> OperatorBundle:
    n, m = problem.n, problem.m
    h1 = np.concatenate([np.full(n, config.h1x), np.full(m, config.h1y)])
    h2 = np.concatenate([np.full(n, config.h2x), np.full(m, config.h2y)])
    h1.setflags(write=False)
    h2.setflags(write=False)
    return OperatorBundle(problem, config, h1, h2)


def geg_step(bundle: OperatorBundle, z) -> np.ndarray:
    return bundle.map_w(z)


def jacobian_at(bundle: OperatorBundle, z) -> np.ndarray:
    return bundle.jac_J(z)
