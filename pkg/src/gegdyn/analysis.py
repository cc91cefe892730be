"""Critical points, equilibrium reports, parameter certificates and region checks."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.stats import qmc

from . import spectral
from .calculus import GegConfig, Variant, make_operators
from .problems import MinMaxProblem, quadratic
from .spectral import Definiteness, Spectrum, StabilityClass

TOL_CRIT = 1e-6
NEWTON_TOL = 1e-9
DEDUP_RADIUS = 1e-4
SADDLE_RADIUS = 1e-3
SADDLE_SLACK = 1e-12


class PreconditionError(ValueError):
    pass


# --------------------------------------------------------------------------
# critical points


def newton_refine(problem: MinMaxProblem, z0, tol=NEWTON_TOL, max_steps=100, max_halvings=40):
    """Damped Newton on ``grad f = 0``; returns the root or ``None``.

    Each step halves the Newton step (at most ``max_halvings`` times) until
    the gradient norm decreases.
    """
    z = np.array(z0, dtype=float)
    g = problem.gradient(z)
    r = float(np.linalg.norm(g))
    for _ in range(max_steps):
        if r <= tol:
            return z
        h = problem.hessian(z)
        try:
            step = np.linalg.solve(h, -g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(h, -g, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            return None
        t = 1.0
        for _ in range(max_halvings + 1):
            zn = z + t * step
            gn = problem.gradient(zn)
            rn = float(np.linalg.norm(gn))
            if np.isfinite(rn) and rn < r:
                break
            t *= 0.5
        else:
            return z if r <= tol else None
        z, g, r = zn, gn, rn
    return z if r <= tol else None


def _dedupe(points, radius):
    kept = []
    for p in points:
        if all(np.linalg.norm(p - q) > radius for q in kept):
            kept.append(p)
    return kept


def find_critical_points(problem: MinMaxProblem, search_box, starts=500, seed=0,
                         tol=NEWTON_TOL, dedup_radius=DEDUP_RADIUS):
    """Multistart damped Newton from Latin-hypercube starts in ``search_box``.

    ``search_box`` is a sequence of ``(low, high)`` pairs, one per
    coordinate. Only roots inside the box are returned, sorted
    lexicographically.
    """
    box = np.asarray(search_box, dtype=float).reshape(-1, 2)
    if box.shape[0] != problem.dim:
        raise ValueError(f"search box has {box.shape[0]} axes, problem has {problem.dim}")
    if np.any(box[:, 1] <= box[:, 0]):
        raise ValueError("search box is degenerate")
    if starts < 1:
        raise ValueError("starts must be >= 1")
    lo, hi = box[:, 0], box[:, 1]
    sample = qmc.LatinHypercube(d=problem.dim, seed=seed).random(starts)
    roots = []
    for z0 in qmc.scale(sample, lo, hi):
        z = newton_refine(problem, z0, tol=tol)
        if z is not None and np.all(z >= lo - 1e-9) and np.all(z <= hi + 1e-9):
            roots.append(z)
    roots = _dedupe(roots, dedup_radius)
    return sorted(roots, key=lambda p: tuple(np.round(p, 9)))


# --------------------------------------------------------------------------
# saddle verdicts and equilibrium reports


class Saddle(str, enum.Enum):
    STRICT = "StrictSaddle"
    CANDIDATE = "CandidateSaddle"
    NOT_SADDLE = "NotSaddle"


@dataclass(frozen=True)
class SaddleVerdict:
    kind: Saddle
    sampling_confirmed: Optional[bool] = None
    xx: Optional[Definiteness] = None
    yy: Optional[Definiteness] = None

    @property
    def possible_saddle(self) -> bool:
        return self.kind is not Saddle.NOT_SADDLE


def _neighbourhood(k, radius, rng):
    if k == 1:
        return np.linspace(-radius, radius, 8).reshape(-1, 1)
    u = rng.normal(size=(8, k))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return (u[:, None, :] * np.linspace(radius / 8, radius, 8)[None, :, None]).reshape(-1, k)


def sampled_saddle_check(problem: MinMaxProblem, z_star, radius=SADDLE_RADIUS, slack=SADDLE_SLACK):
    """Test ``f(x*, y) <= f(x*, y*) <= f(x, y*)`` on a small neighbourhood grid."""
    z_star = np.asarray(z_star, dtype=float)
    n = problem.n
    f0 = problem.eval(z_star)
    rng = np.random.default_rng(0)
    dx = _neighbourhood(problem.n, radius, rng)
    dy = _neighbourhood(problem.m, radius, rng)
    for ox in dx:
        for oy in dy:
            zx = z_star.copy()
            zx[:n] += ox
            zy = z_star.copy()
            zy[n:] += oy
            if problem.eval(zy) > f0 + slack or f0 > problem.eval(zx) + slack:
                return False
    return True


def saddle_verdict(problem: MinMaxProblem, z_star, hessian=None) -> SaddleVerdict:
    h = problem.hessian(z_star) if hessian is None else hessian
    h = 0.5 * (h + h.T)
    n = problem.n
    xx = spectral.symmetric_definiteness(h[:n, :n])
    yy = spectral.symmetric_definiteness(h[n:, n:])
    if xx is Definiteness.POS_DEF and yy is Definiteness.NEG_DEF:
        return SaddleVerdict(Saddle.STRICT, None, xx, yy)
    if not xx.is_psd or not yy.is_nsd:
        return SaddleVerdict(Saddle.NOT_SADDLE, None, xx, yy)
    return SaddleVerdict(Saddle.CANDIDATE, sampled_saddle_check(problem, z_star), xx, yy)


@dataclass(frozen=True)
class EquilibriumReport:
    location: np.ndarray
    residual: float
    config: GegConfig
    jacobian: np.ndarray
    spectrum_J: Spectrum
    spectrum_LH: Spectrum
    stability: StabilityClass
    saddle: SaddleVerdict
    hessian_invertible: bool
    hessian_condition: float

    @property
    def stable(self) -> bool:
        return self.stability.stable

    def to_dict(self) -> dict:
        return {
            "location": [float(v) for v in self.location],
            "residual": self.residual,
            "config": self.config.to_dict(),
            "eigenvalues_J": self.spectrum_J.pairs(),
            "eigenvalues_LambdaH": self.spectrum_LH.pairs(),
            "spectral_radius": self.stability.spectral_radius,
            "stability": self.stability.stability.value,
            "stability_margin": self.stability.margin,
            "saddle": self.saddle.kind.value,
            "saddle_sampling_confirmed": self.saddle.sampling_confirmed,
            "hessian_xx": None if self.saddle.xx is None else self.saddle.xx.value,
            "hessian_yy": None if self.saddle.yy is None else self.saddle.yy.value,
            "hessian_invertible": self.hessian_invertible,
            "hessian_condition": self.hessian_condition,
        }


def report(problem: MinMaxProblem, config: GegConfig, z_star, tol_crit=TOL_CRIT,
           tol_unit=spectral.DEFAULT_TOL_UNIT) -> EquilibriumReport:
    z_star = np.asarray(z_star, dtype=float)
    residual = float(np.linalg.norm(problem.gradient(z_star)))
    if not residual <= tol_crit:
        raise PreconditionError(f"not a critical point: ||grad f|| = {residual:.3e} > {tol_crit:g}")
    bundle = make_operators(problem, config)
    jac = bundle.jac_J(z_star)
    spec_j = spectral.eigenvalues(jac, name="J(z*)")
    lh = bundle.scaling() @ bundle.jac_H(z_star)
    spec_lh = spectral.eigenvalues(lh, name="Lambda_tau H(z*)")
    hess = problem.hessian(z_star)
    hess = 0.5 * (hess + hess.T)
    sv = np.abs(spectral.symmetric_eigenvalues(hess))
    smax = float(sv.max())
    smin = float(sv.min())
    invertible = smin > 1e-8 * smax
    cond = smax / smin if smin > 0 else float("inf")
    return EquilibriumReport(
        location=z_star.copy(),
        residual=residual,
        config=config,
        jacobian=jac,
        spectrum_J=spec_j,
        spectrum_LH=spec_lh,
        stability=spectral.classify(spec_j, tol_unit),
        saddle=saddle_verdict(problem, z_star, hess),
        hessian_invertible=invertible,
        hessian_condition=cond,
    )


def lemma3_check(problem: MinMaxProblem, config: GegConfig, z_star) -> float:
    """Distance between sigma(J(z*)) and the image of sigma(Lambda H(z*)) under
    ``kappa -> 1 + gamma (eta kappa + eta^2 kappa^2)``."""
    bundle = make_operators(problem, config)
    kappa = spectral.eigenvalues(bundle.scaling() @ bundle.jac_H(z_star)).eigenvalues
    eta, gamma = config.eta, config.gamma
    mapped = 1.0 + gamma * (eta * kappa + eta * eta * kappa * kappa)
    actual = spectral.eigenvalues(bundle.jac_J(z_star)).eigenvalues
    return spectral.match_distance(mapped, actual)


# --------------------------------------------------------------------------
# parameter certificates


@dataclass(frozen=True)
class ParamCertificate:
    lemma1_ok: bool
    lemma1_set: Optional[str]
    thm_real_ok: bool
    thm_general_ok: bool
    eta: float
    tau: float
    gamma: float
    c: float
    L: float

    def to_dict(self):
        return asdict(self)


def certify_params(eta, tau, gamma, c=None, L=1.0) -> ParamCertificate:
    """Check the step-size hypotheses of the local-diffeomorphism and
    saddle-inclusion results.

    ``c`` defaults to ``eta * L``. ``lemma1_ok`` requires ``eta <= c / L``
    and ``(tau, gamma)`` in P1 (tau <= 1, gamma <= tau^2 / (c tau + c^2)) or
    P2 (tau >= 1, gamma <= 1 / (c + c^2)).
    """
    if c is None:
        c = eta * L
    if not all(v > 0 for v in (eta, tau, gamma, c, L)):
        raise ValueError("all certificate inputs must be positive")
    in_p2 = tau >= 1.0 and gamma <= 1.0 / (c + c * c)
    in_p1 = tau <= 1.0 and gamma <= tau * tau / (c * tau + c * c)
    eta_ok = eta <= c / L * (1.0 + 1e-12)
    active = "P2" if in_p2 else ("P1" if in_p1 else None)
    lemma1 = eta_ok and active is not None
    eta_thm = eta < min(1.0, tau) / L
    return ParamCertificate(
        lemma1_ok=lemma1,
        lemma1_set=active if lemma1 else None,
        thm_real_ok=eta_thm and 0.0 < gamma < 8.0,
        thm_general_ok=eta_thm and 0.0 < gamma <= 1.0,
        eta=float(eta), tau=float(tau), gamma=float(gamma), c=float(c), L=float(L),
    )


def sampled_lipschitz(problem: MinMaxProblem, box, samples=2000, seed=0) -> float:
    """Largest Hessian spectral norm over seeded uniform samples in ``box``."""
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(box[:, 0], box[:, 1], size=(samples, box.shape[0]))
    best = 0.0
    for z in pts:
        h = problem.hessian(z)
        best = max(best, float(np.abs(spectral.symmetric_eigenvalues(0.5 * (h + h.T))).max()))
    return best


# --------------------------------------------------------------------------
# numerical region checks


def appendix_modulus(a, b, gamma):
    """``|1 + gamma w|`` for ``w = (a + jb)(1 + a + jb)``."""
    re = 1.0 + gamma * (a + a * a - b * b)
    im = gamma * (b + 2.0 * a * b)
    return np.sqrt(re * re + im * im)


def appendix_ratio(a, b):
    """The gamma at which ``|1 + gamma w| = 1`` for ``w = (a + jb)(1 + a + jb)``."""
    u = a * a - b * b + a
    v = 2.0 * a * b + b
    return -2.0 * u / (u * u + v * v)


@dataclass(frozen=True)
class RegionCheck:
    max_modulus: float
    min_ratio: float
    gamma: float
    density: int


def verify_appendix_regions(grid_density=2000, gamma_probe=1.0) -> RegionCheck:
    """Dense-grid version of the two region bounds behind the general-spectrum
    inclusion result.

    Sweeps ``a`` in (-1, 0) and ``b`` in (-sqrt(1-a^2), sqrt(1-a^2)) over
    cell centres. ``max_modulus`` is the largest ``|1 + gamma w|``;
    ``min_ratio`` is the smallest root ``-2 Re w / |w|^2`` (points with
    ``|w|^2 < 1e-12`` are skipped).
    """
    if grid_density < 100:
        raise ValueError("grid_density must be >= 100")
    if not 0.0 < gamma_probe <= 1.0:
        raise ValueError("gamma_probe must lie in (0, 1]")
    t = (np.arange(grid_density) + 0.5) / grid_density
    a = -1.0 + t
    half = np.sqrt(1.0 - a * a)
    aa = a[:, None]
    bb = -half[:, None] + 2.0 * half[:, None] * t[None, :]
    aa = np.broadcast_to(aa, bb.shape)
    mod = appendix_modulus(aa, bb, gamma_probe)
    u = aa * aa - bb * bb + aa
    v = 2.0 * aa * bb + bb
    den = u * u + v * v
    ok = den >= 1e-12
    ratio = -2.0 * u[ok] / den[ok]
    return RegionCheck(float(mod.max()), float(ratio.min()), float(gamma_probe), int(grid_density))


# --------------------------------------------------------------------------
# random quadratic suites


def random_saddle_quadratic(rng, strict=False, real_spectrum=False, max_block=3):
    """Hessian ``[[A, B], [B^T, C]]`` with ``A = M^T M``, ``C = -N^T N``.

    ``strict`` adds a positive shift so that A > 0 and C < 0;
    ``real_spectrum`` sets ``B = 0``. Returns ``(problem, hessian)``.
    """
    n = int(rng.integers(1, max_block + 1))
    m = int(rng.integers(1, max_block + 1))
    mm = rng.normal(size=(int(rng.integers(1, n + 1)), n))
    nn = rng.normal(size=(int(rng.integers(1, m + 1)), m))
    a = mm.T @ mm
    c = -(nn.T @ nn)
    if strict:
        a += rng.uniform(0.1, 1.0) * np.eye(n)
        c -= rng.uniform(0.1, 1.0) * np.eye(m)
    b = np.zeros((n, m)) if real_spectrum else rng.normal(size=(n, m))
    hess = np.block([[a, b], [b.T, c]])
    return quadratic(hess, n, m, name="random-quadratic"), hess


def lemma2_property_suite(seeds=200, seed=0) -> float:
    """Largest real part of sigma(Lambda_tau H) over random problems whose
    Hessian blocks meet the saddle necessary conditions."""
    if seeds < 1:
        raise ValueError("seeds must be >= 1")
    worst = -np.inf
    for s in range(seeds):
        rng = np.random.default_rng([seed, s])
        problem, hess = random_saddle_quadratic(rng)
        tau = rng.uniform(0.1, 10.0)
        bundle = make_operators(problem, GegConfig.from_params(0.1, tau, 1.0))
        kappa = spectral.eigenvalues(bundle.scaling() @ bundle.jac_H(np.zeros(problem.dim))).eigenvalues
        worst = max(worst, float(kappa.real.max()))
    return worst


def spectral_norm(matrix) -> float:
    m = np.asarray(matrix, dtype=float)
    return float(np.sqrt(spectral.symmetric_eigenvalues(m.T @ m).max()))


def inclusion_suite(count=100, seed=0, real_spectrum=False):
    """Draw strict-saddle quadratics with certified step sizes and report
    each origin's stability. Returns a list of ``(report, certificate)``."""
    out = []
    for s in range(count):
        rng = np.random.default_rng([seed, s, int(real_spectrum)])
        problem, hess = random_saddle_quadratic(rng, strict=True, real_spectrum=real_spectrum)
        lip = spectral_norm(hess)
        tau = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
        eta = rng.uniform(0.05, 0.95) * min(1.0, tau) / lip
        gamma = rng.uniform(0.05, 7.95) if real_spectrum else rng.uniform(0.05, 1.0)
        cert = certify_params(eta, tau, gamma, L=lip)
        rep = report(problem, GegConfig.from_params(eta, tau, gamma), np.zeros(problem.dim))
        out.append((rep, cert))
    return out


# --------------------------------------------------------------------------
# convergence tables for quadratic problems

TABLE_VARIANTS = (Variant.TAU_EG, Variant.EG_PLUS, Variant.GEG)


def variant_config(variant, eta, tau, gamma) -> GegConfig:
    """The GEG member used in a table column: tau-EG drops gamma, EG+ drops tau."""
    variant = Variant.parse(variant) if isinstance(variant, str) else variant
    if variant is Variant.TAU_EG:
        return GegConfig.from_params(eta, tau, 1.0, variant)
    if variant is Variant.EG_PLUS:
        return GegConfig.from_params(eta, 1.0, gamma, variant)
    if variant is Variant.EG:
        return GegConfig.from_params(eta, 1.0, 1.0, variant)
    return GegConfig.from_params(eta, tau, gamma, variant)


def simulate_envelope(bundle, z0, iters=10_000, window=500, blowup=1e8, floor=1e-200) -> bool:
    """Simulation verdict for a linear map: True when the trajectory stays
    finite and the peak ``||z||`` over the last ``window`` iterations is
    below the peak over the ``window`` iterations ending at ``iters // 2``.

    Comparing windowed peaks rather than single norms makes the test
    insensitive to the rotation and transient growth of non-normal maps.
    A trajectory that reaches ``||z|| <= floor`` has arrived at the origin
    and counts as converged.
    """
    if iters < 4 * window:
        raise ValueError("iters must be at least 4 * window")
    z = np.array(z0, dtype=float)
    norms = np.empty(iters + 1)
    norms[0] = np.linalg.norm(z)
    for k in range(1, iters + 1):
        z = bundle.map_w(z)
        norms[k] = np.linalg.norm(z)
        if not np.isfinite(norms[k]) or norms[k] > blowup:
            return False
        if norms[k] <= floor:
            return True
    half = iters // 2
    return bool(norms[-window:].max() < norms[half - window + 1:half + 1].max())


@dataclass(frozen=True)
class TableCell:
    variant: Variant
    config: GegConfig
    spectral_radius: float
    stability: spectral.Stability
    simulated: bool

    @property
    def verdict(self) -> str:
        return "YES" if self.stability is spectral.Stability.ASYMPTOTICALLY_STABLE else "NO"

    @property
    def simulated_verdict(self) -> str:
        return "YES" if self.simulated else "NO"

    @property
    def agrees(self) -> bool:
        return self.verdict == self.simulated_verdict


class NotQuadraticError(ValueError):
    pass


def convergence_table(problem: MinMaxProblem, rows, iters=10_000, z0=None):
    """For each ``(eta, tau, gamma)`` row: tau-EG, EG+ and GEG verdicts from
    the spectral radius of the constant Jacobian plus a simulation check."""
    if not problem.quadratic:
        raise NotQuadraticError(f"problem {problem.name!r} has a state-dependent Jacobian; "
                                "use the 'run' command to study it")
    origin = np.zeros(problem.dim)
    z0 = np.ones(problem.dim) if z0 is None else np.asarray(z0, dtype=float)
    table = []
    for eta, tau, gamma in rows:
        cells = []
        for variant in TABLE_VARIANTS:
            cfg = variant_config(variant, eta, tau, gamma)
            bundle = make_operators(problem, cfg)
            spec = spectral.eigenvalues(bundle.jac_J(origin), name=f"J[{variant.value}]")
            cls = spectral.classify(spec)
            cells.append(TableCell(variant, cfg, spec.spectral_radius, cls.stability,
                                   simulate_envelope(bundle, z0, iters)))
        table.append(((float(eta), float(tau), float(gamma)), cells))
    return table


BILINEAR_TABLE_ROWS = (
    (0.9, 2.0, 0.25),
    (0.9, 0.5, 0.25),
    (0.5, 0.1, 0.1),
    (0.9, 2.0, 1.2),
    (0.9, 0.01, 0.1),
    (0.9, 0.01, 0.01),
    (0.5, 2.0, 2.0),
    (0.5, 200.0, 2.0),
)
