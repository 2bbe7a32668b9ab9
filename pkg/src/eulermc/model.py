"""SDE models, discretization grids, and assumption checks.

Two model families are supported.  In the non-degenerate case the noise
drives every coordinate.  In the kinetic case the state splits into a
velocity block of dimension d' = d/2 driven by the noise and a position
block that integrates the velocity; the user supplies coefficients for the
velocity block only.

Assumption checks are sample based: they evaluate ellipticity, drift
boundedness and the spatial Holder quotient of the diffusion matrix on
user-provided points and report worst cases.  A pass is necessary, not
sufficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm, qmc

from .errors import ArgumentError, ConfigError, InvalidModelError


class Case(Enum):
    NONDEGENERATE = "nondegenerate"
    KINETIC = "kinetic"


@dataclass(frozen=True)
class SdeModel:
    """Diffusion model together with its ellipticity/boundedness metadata.

    drift maps (t, x) with x of shape (..., d) to shape (..., d_prime); for
    kinetic models this is the velocity-block drift only.  sigma maps (t, x)
    to (..., d_prime, d_prime).  Both callables must be vectorized over the
    leading axes of x.

    lambda0 bounds the ellipticity ratio of a = sigma sigma^T into
    [1/lambda0, lambda0], L0 bounds sup|drift| plus the eta-Holder quotient
    of a in space.
    """

    case: Case
    d: int
    drift: Callable[[float, np.ndarray], np.ndarray]
    sigma: Callable[[float, np.ndarray], np.ndarray]
    lambda0: float
    L0: float
    eta: float
    name: str = "custom"

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError("dimension d must be >= 1")
        if self.case is Case.KINETIC and self.d % 2 != 0:
            raise ConfigError("kinetic models need an even dimension")
        if self.lambda0 <= 0 or self.L0 <= 0:
            raise ConfigError("lambda0 and L0 must be positive")
        if not 0 < self.eta <= 1:
            raise ConfigError("eta must lie in (0, 1]")

    @property
    def d_prime(self) -> int:
        return self.d // 2 if self.case is Case.KINETIC else self.d

    def diffusion(self, t: float, x: np.ndarray) -> np.ndarray:
        """a(t, x) = sigma sigma^T, shape (..., d', d')."""
        sig = np.asarray(self.sigma(t, x), dtype=float)
        return sig @ sig.swapaxes(-1, -2)


@dataclass(frozen=True)
class SchemeGrid:
    """Uniform time grid 0 = t_0 < ... < t_N = T with step T/N."""

    T: float
    N: int
    times: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.T <= 0:
            raise ConfigError("horizon T must be positive")
        if self.N < 1:
            raise ConfigError("step count N must be >= 1")
        times = self.delta * np.arange(self.N + 1, dtype=float)
        times[-1] = self.T  # last step absorbs float rounding
        object.__setattr__(self, "times", times)

    @property
    def delta(self) -> float:
        return self.T / self.N

    def step_index(self, t: float) -> int:
        """Index i with t_i <= t < t_{i+1} (N-1 for t >= T)."""
        if t < 0:
            raise ArgumentError("time below the grid")
        return min(int(t / self.delta), self.N - 1)


@dataclass(frozen=True)
class GaussParams:
    """Two-sided Gaussian envelope parameters: shape c > 0, domination C >= 1."""

    c: float
    C: float

    def __post_init__(self):
        if self.c <= 0:
            raise ConfigError("envelope shape c must be positive")
        if self.C < 1:
            raise ConfigError("domination constant C must be >= 1")


def sphere_surface_measure(d: int) -> float:
    """Surface measure of the unit sphere in R^d; counts {-1, 1} for d = 1."""
    if d < 1:
        raise ArgumentError("dimension must be >= 1")
    if d == 1:
        return 2.0
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def unit_directions(d: int, n: int, seed: int = 0) -> np.ndarray:
    """n quasi-random unit vectors in R^d (both points of S^0 for d = 1)."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    sob = qmc.Sobol(d, scramble=True, seed=seed)
    u = sob.random(n)
    u = np.clip(u, 1e-12, 1 - 1e-12)
    g = norm.ppf(u)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(frozen=True)
class GrowthSpec:
    """Linear growth of slope beta along rays in a direction cone beyond rho0.

    cone_measure is the surface measure of the cone's direction set (the
    number of half-lines, 1 or 2, when d = 1).  contains decides membership
    of a unit vector in the cone.
    """

    rho0: float
    beta: float
    cone_measure: float
    contains: Callable[[np.ndarray], bool] = lambda s: True

    def __post_init__(self):
        if self.rho0 <= 0 or self.beta <= 0:
            raise ConfigError("rho0 and beta must be positive")
        if self.cone_measure <= 0:
            raise ConfigError("cone_measure must be positive")

    @classmethod
    def full_sphere(cls, d: int, rho0: float, beta: float) -> "GrowthSpec":
        return cls(rho0=rho0, beta=beta, cone_measure=sphere_surface_measure(d))


@dataclass(frozen=True)
class ValidationReport:
    ratio_min: float
    ratio_max: float
    sup_drift: float
    holder_sup: float
    n_points: int
    n_pairs: int
    lambda0: float
    L0: float
    tol: float = 1e-9  # relative slack so exact-boundary models pass

    @property
    def uniformly_elliptic(self) -> bool:
        slack = 1.0 + self.tol
        return (
            self.ratio_min >= 1.0 / (self.lambda0 * slack)
            and self.ratio_max <= self.lambda0 * slack
        )

    @property
    def drift_and_holder_bounded(self) -> bool:
        return self.sup_drift + self.holder_sup <= self.L0 * (1.0 + self.tol)

    @property
    def passed(self) -> bool:
        return self.uniformly_elliptic and self.drift_and_holder_bounded


def validate_assumptions(
    model: SdeModel,
    sample_points: Sequence,
    sample_pairs: Sequence,
    n_directions: int = 128,
    seed: int = 0,
) -> ValidationReport:
    """Check ellipticity, drift bound and the Holder quotient on samples.

    sample_points is a sequence of (t, x); sample_pairs a sequence of
    (t, x, y).  Ellipticity ratios <a xi, xi>/|xi|^2 are probed on
    n_directions random unit vectors per point and must stay inside
    [1/lambda0, lambda0]; sup|drift| plus the worst Holder quotient of the
    diffusion matrix must stay below L0.
    """
    if len(sample_points) == 0 or len(sample_pairs) == 0:
        raise ArgumentError("sample lists must be non-empty")
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((max(n_directions, 100), model.d_prime))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)

    ratio_min, ratio_max, sup_drift = math.inf, -math.inf, 0.0
    for t, x in sample_points:
        x = np.asarray(x, dtype=float)
        a = model.diffusion(t, x)
        if not np.all(np.isfinite(a)):
            raise InvalidModelError(f"diffusion matrix non-finite at t={t}, x={x}")
        ratios = np.einsum("ni,ij,nj->n", dirs, a, dirs)
        ratio_min = min(ratio_min, float(ratios.min()))
        ratio_max = max(ratio_max, float(ratios.max()))
        b = np.asarray(model.drift(t, x), dtype=float)
        if not np.all(np.isfinite(b)):
            raise InvalidModelError(f"drift non-finite at t={t}, x={x}")
        sup_drift = max(sup_drift, float(np.linalg.norm(b)))

    holder_sup = 0.0
    for t, x, y in sample_pairs:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        gap = float(np.linalg.norm(x - y))
        if gap == 0.0:
            continue
        diff = model.diffusion(t, x) - model.diffusion(t, y)
        holder_sup = max(holder_sup, float(np.linalg.norm(diff)) / gap**model.eta)

    return ValidationReport(
        ratio_min=ratio_min,
        ratio_max=ratio_max,
        sup_drift=sup_drift,
        holder_sup=holder_sup,
        n_points=len(sample_points),
        n_pairs=len(sample_pairs),
        lambda0=model.lambda0,
        L0=model.L0,
    )


@dataclass(frozen=True)
class GrowthCheck:
    ok: bool
    margin: float


def check_growth(
    f, spec: GrowthSpec, sample_rays: Sequence, tol: float = 1e-9
) -> GrowthCheck:
    """Check f(rho s) - f(rho0 s) >= beta (rho - rho0) on sampled rays.

    sample_rays is a sequence of (unit direction inside the cone, radius
    above rho0).  Returns the pass flag and the minimum slack; tol is the
    absolute roundoff slack allowed for exact-boundary functions.
    """
    if len(sample_rays) == 0:
        raise ArgumentError("need at least one sample ray")
    margin = math.inf
    for s, rho in sample_rays:
        s = np.asarray(s, dtype=float)
        if rho <= spec.rho0:
            raise ArgumentError("ray radii must exceed rho0")
        if not spec.contains(s):
            raise ArgumentError("ray direction outside the cone")
        slack = float(f(rho * s) - f(spec.rho0 * s) - spec.beta * (rho - spec.rho0))
        margin = min(margin, slack)
    return GrowthCheck(ok=margin >= -tol, margin=margin)


def sample_rays(spec: GrowthSpec, d: int, radii, n_directions: int = 64, seed: int = 0):
    """Build (direction, radius) pairs inside the cone for check_growth."""
    dirs = [s for s in unit_directions(d, n_directions, seed=seed) if spec.contains(s)]
    if not dirs:
        raise ArgumentError("no sampled direction lies in the cone")
    return [(s, float(r)) for s in dirs for r in np.atleast_1d(radii)]


# ---------------------------------------------------------------------------
# Model presets.  Custom coefficients are plugged in as Python callables via
# register_model_preset; they are never parsed from text.


def _const_model(d=1, b0=0.0, sigma0=1.0, lambda0=None, L0=None, eta=1.0):
    d = int(d)
    b = np.broadcast_to(np.atleast_1d(np.asarray(b0, dtype=float)), (d,)).copy()
    s0 = float(sigma0)
    eye = s0 * np.eye(d)

    def drift(t, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(b, x.shape[:-1] + (d,))

    def sigma(t, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(eye, x.shape[:-1] + (d, d))

    if lambda0 is None:
        lambda0 = max(s0**2, s0**-2)
    if L0 is None:
        L0 = max(1.0, float(np.linalg.norm(b)))
    return SdeModel(Case.NONDEGENERATE, d, drift, sigma, float(lambda0), float(L0), float(eta), name="const")


def _trig_model(b_amp=0.0, a_amp=0.1, lambda0=None, L0=None, eta=1.0):
    """Scalar model with a(x) = 1 + a_amp sin(x) and drift b_amp sin(x)."""
    a_amp = float(a_amp)
    b_amp = float(b_amp)
    if not 0 <= a_amp < 1:
        raise ConfigError("a_amp must lie in [0, 1) to keep the model elliptic")

    def drift(t, x):
        x = np.asarray(x, dtype=float)
        return b_amp * np.sin(x)

    def sigma(t, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(1.0 + a_amp * np.sin(x))[..., None]

    if lambda0 is None:
        lambda0 = 1.0 / (1.0 - a_amp) if a_amp > 0 else 1.0
    if L0 is None:
        L0 = max(1.0, b_amp + a_amp)
    return SdeModel(Case.NONDEGENERATE, 1, drift, sigma, float(lambda0), float(L0), float(eta), name="trig")


def _kinetic_model(dp=1, damp=0.0, sigma0=1.0, lambda0=None, L0=None, eta=1.0):
    """Velocity/position model; velocity drift -damp tanh(v), noise sigma0 I."""
    dp = int(dp)
    damp = float(damp)
    s0 = float(sigma0)
    eye = s0 * np.eye(dp)

    def drift(t, x):
        x = np.asarray(x, dtype=float)
        return -damp * np.tanh(x[..., :dp])

    def sigma(t, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(eye, x.shape[:-1] + (dp, dp))

    if lambda0 is None:
        lambda0 = max(s0**2, s0**-2)
    if L0 is None:
        L0 = max(1.0, damp * math.sqrt(dp))
    return SdeModel(Case.KINETIC, 2 * dp, drift, sigma, float(lambda0), float(L0), float(eta), name="kinetic")


MODEL_PRESETS = {
    "const": _const_model,
    "trig": _trig_model,
    "kinetic": _kinetic_model,
}


def register_model_preset(name: str, builder) -> None:
    MODEL_PRESETS[name] = builder


def model_preset(name: str, **params) -> SdeModel:
    try:
        builder = MODEL_PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown model preset {name!r}") from None
    return builder(**params)
