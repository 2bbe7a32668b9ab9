"""Concentration constants and non-asymptotic Monte Carlo deviation bounds.

Upper side: a batch mean of a 1-Lipschitz functional of the scheme deviates
from its expectation by more than r + delta with probability at most
2 exp(-M r^2 / alpha), where alpha is the log-Sobolev constant of the
dominating Gaussian kernel and delta = 2 sqrt(alpha log C) is an
M-independent bias coming from the domination constant.

Lower side: under a cone growth assumption on the functional the deviation
probability is at least 2 exp(-M (1/alpha_lower) max(r/beta, rho0)^2), with
an explicit rate 1/alpha_lower = Lambda + chi assembled from the flat
Gaussian lower envelope and a cone-measure penalty chi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .errors import ArgumentError, LambdaTooLargeError
from .gaussianref import (
    KernelSpec,
    cone_constant,
    hessian_spectral_bounds,
    kernel_density,
    kernel_mean_cov,
    kernel_normalizer,
    potential_eval,
    PotentialSpec,
    sample_kernel,
)
from .model import Case, GaussParams, GrowthSpec, unit_directions
from .quadrature import adaptive_1d, tensor_quad_2d
from .simulate import TerminalBatch

SQRT13 = math.sqrt(13.0)


def lsi_constant(lambda_min: float) -> float:
    """Log-Sobolev constant 2/lambda of a Gibbs measure with Hess V >= lambda I."""
    if lambda_min <= 0:
        raise ArgumentError("lambda_min must be positive")
    return 2.0 / lambda_min


def concentration_alpha(case: Case, c: float, T: float) -> float:
    """Sub-Gaussian constant alpha of the dominating kernel at horizon T.

    Equals 2/lambda_min of the kernel potential's Hessian: 2T/c in the
    non-degenerate case, and in the kinetic case the inverse of
    (c/2T) (1 + (3/T^2)(1 - sqrt(1 + T^2/3 + T^4/9))).
    """
    if c <= 0 or T <= 0:
        raise ArgumentError("need c > 0 and T > 0")
    if case is Case.KINETIC:
        root = math.sqrt(1.0 + T * T / 3.0 + T**4 / 9.0)
        inv = c / (2.0 * T) * (1.0 + 3.0 / T**2 * (1.0 - root))
        return 1.0 / inv
    return 2.0 * T / c


def concentration_alpha_normalized(c: float, T: float) -> float:
    """alpha for kinetic functionals of (velocity, position/T).

    The time-normalized potential Hessian is (c/T) [[2, -3], [-3, 6]] per
    coordinate pair, with smallest eigenvalue (4 - sqrt(13)) c / T, so
    alpha = 2T / ((4 - sqrt(13)) c).  (Stated elsewhere as
    alpha = (4 - sqrt(13)) c / T, which is the eigenvalue itself and does
    not scale like a squared deviation; the LSI reading is used here.)
    """
    if c <= 0 or T <= 0:
        raise ArgumentError("need c > 0 and T > 0")
    return 2.0 * T / ((4.0 - SQRT13) * c)


def domination_bias(C: float, alpha: float) -> float:
    """M-independent bias 2 sqrt(alpha log C)."""
    if C < 1:
        raise ArgumentError("domination constant C must be >= 1")
    if alpha <= 0:
        raise ArgumentError("alpha must be positive")
    return 2.0 * math.sqrt(alpha * math.log(C))


def upper_tail_bound(r: float, M: int, alpha: float) -> float:
    """Raw bound 2 exp(-M r^2 / alpha); clipping at 1 is a display concern."""
    if r < 0 or M < 1 or alpha <= 0:
        raise ArgumentError("need r >= 0, M >= 1, alpha > 0")
    return 2.0 * math.exp(-M * r * r / alpha)


def confidence_radius(epsilon: float, M: int, alpha: float) -> float:
    """Radius r with upper_tail_bound(r, M, alpha) = epsilon."""
    if not 0.0 < epsilon <= 2.0:
        raise ArgumentError("epsilon must lie in (0, 2]")
    return math.sqrt(alpha / M * math.log(2.0 / epsilon))


def _log_plus(value: float) -> float:
    return max(math.log(value), 0.0) if value > 0 else 0.0


def growth_penalty(
    case: Case,
    d: int,
    rho0: float,
    C: float,
    cone_measure: float,
    theta: float | None = None,
    T: float | None = None,
) -> float:
    """Additive penalty chi in the lower deviation rate.

    Non-degenerate, even d:  log(pi^{d/2} C / K(d, A))_+ / rho0^2.
    Non-degenerate, odd d:   same with K(d, A) arccos(theta^{-1/2}).
    Kinetic (even d only):
      log((pi/T)^{d/2} [T^2 + 3(1 + sqrt(1 + T^2/3 + T^4/9))]^{d/2} C
          / K(d, A))_+ / rho0^2.
    """
    if rho0 <= 0:
        raise ArgumentError("rho0 must be positive")
    if C < 1:
        raise ArgumentError("C must be >= 1")
    K = cone_constant(d, cone_measure)
    if case is Case.KINETIC:
        if d % 2 != 0:
            raise ArgumentError("kinetic models have even dimension")
        if T is None or T <= 0:
            raise ArgumentError("kinetic penalty needs T > 0")
        root = math.sqrt(1.0 + T * T / 3.0 + T**4 / 9.0)
        inner = (math.pi / T) ** (d / 2) * (T * T + 3.0 * (1.0 + root)) ** (d / 2)
        return _log_plus(inner * C / K) / rho0**2
    if d % 2 == 0:
        return _log_plus(math.pi ** (d / 2) * C / K) / rho0**2
    if theta is None or theta <= 1:
        raise ArgumentError("odd dimensions need theta > 1")
    return _log_plus(math.pi ** (d / 2) * C / (K * math.acos(theta**-0.5))) / rho0**2


@dataclass(frozen=True)
class LowerRate:
    inv_alpha: float  # 1/alpha_lower = Lambda + chi (theta Lambda + chi, odd d)
    lam: float  # Lambda, the flat-envelope curvature term
    chi: float
    theta: float | None


def lower_rate(
    case: Case,
    d: int,
    c: float,
    T: float,
    rho0: float,
    C: float,
    cone_measure: float,
    theta: float | None = None,
) -> LowerRate:
    """Reduced lower deviation rate: Lambda = lambda_max/2 of the c^{-1} kernel.

    Valid when the lower-envelope Gaussian is centered at the cone's sphere
    center, so its potential and gradient vanish there; lower_rate_full keeps
    the sphere terms.
    """
    lam_bar = hessian_spectral_bounds(case, 1.0 / c, T)[1]
    lam = lam_bar / 2.0
    chi = growth_penalty(case, d, rho0, C, cone_measure, theta=theta, T=T)
    if case is not Case.KINETIC and d % 2 == 1:
        if theta is None or theta <= 1:
            raise ArgumentError("odd dimensions need theta > 1")
        inv = theta * lam + chi
    else:
        inv = lam + chi
    return LowerRate(inv_alpha=inv, lam=lam, chi=chi, theta=theta)


def lower_rate_full(
    case: Case,
    d: int,
    c: float,
    T: float,
    rho0: float,
    C: float,
    cone_measure: float,
    x,
    theta: float | None = None,
    n_directions: int = 2**14,
    seed: int = 0,
) -> LowerRate:
    """Lower rate keeping the sphere supremum terms of the envelope potential.

    Lambda = lambda_max/2 + sup_s |V(s rho0)| / rho0^2 + sup_s |grad V(s rho0)|
    / rho0 with V the potential of the c^{-1} kernel started at x; the
    penalty uses the true normalizer Z of that kernel.
    """
    spec = PotentialSpec(case, 1.0 / c, T, np.asarray(x, dtype=float))
    dirs = unit_directions(d, n_directions, seed=seed)
    sup_v, sup_g = 0.0, 0.0
    for s in dirs:
        value, grad, _ = potential_eval(spec, rho0 * s)
        sup_v = max(sup_v, abs(value))
        sup_g = max(sup_g, float(np.linalg.norm(grad)))
    lam_bar = hessian_spectral_bounds(case, 1.0 / c, T)[1]
    lam = lam_bar / 2.0 + sup_v / rho0**2 + sup_g / rho0
    Z = kernel_normalizer(case, 1.0 / c, T, d)
    K = cone_constant(d, cone_measure)
    if case is not Case.KINETIC and d % 2 == 1:
        if theta is None or theta <= 1:
            raise ArgumentError("odd dimensions need theta > 1")
        chi = _log_plus(Z * lam ** (d / 2) * C / (K * math.acos(theta**-0.5))) / rho0**2
        inv = theta * lam + chi
    else:
        chi = _log_plus(Z * lam ** (d / 2) * C / K) / rho0**2
        inv = lam + chi
    return LowerRate(inv_alpha=inv, lam=lam, chi=chi, theta=theta)


def optimize_theta(
    case: Case,
    d: int,
    c: float,
    T: float,
    rho0: float,
    C: float,
    cone_measure: float,
    hi: float = 100.0,
) -> float:
    """Minimize theta * Lambda + chi(theta) over theta in (1, hi] (odd d)."""
    if d % 2 == 0:
        raise ArgumentError("theta only enters odd dimensions")

    def objective(theta):
        return lower_rate(case, d, c, T, rho0, C, cone_measure, theta=theta).inv_alpha

    res = minimize_scalar(objective, bounds=(1.0 + 1e-9, hi), method="bounded")
    return float(res.x)


def lower_tail_bound(
    r: float, M: int, inv_rate: float, beta: float, rho0: float
) -> float:
    """2 exp(-M inv_rate max(r/beta, rho0)^2); constant plateau below beta rho0."""
    if r <= 0 or M < 1:
        raise ArgumentError("need r > 0 and M >= 1")
    return 2.0 * math.exp(-M * inv_rate * max(r / beta, rho0) ** 2)


def wasserstein_bound(alpha: float, kappa: float) -> float:
    """Transport bound sqrt(alpha log kappa) under kappa-domination + LSI."""
    if kappa < 1:
        raise ArgumentError("kappa must be >= 1")
    if alpha <= 0:
        raise ArgumentError("alpha must be positive")
    return math.sqrt(alpha * math.log(kappa))


@dataclass(frozen=True)
class LowerBias:
    value: float
    gamma_term: float  # mean of F under the c^{-1} kernel
    floor: float  # inf of F over the rho0 sphere
    mc_se: float | None  # standard error when the mean came from sampling


def lower_bias(
    case: Case,
    c: float,
    C: float,
    T: float,
    alpha: float,
    f,
    x,
    growth: GrowthSpec,
    d: int,
    method: str = "auto",
    mc_samples: int = 200_000,
    seed: int = 0,
    n_directions: int = 2**14,
) -> LowerBias:
    """Bias (1 + sqrt 2) sqrt(alpha log C) + gamma(F) + rho0 beta - inf F.

    gamma(F) integrates F against the c^{-1} kernel started at x, by
    quadrature for d <= 2 and by Monte Carlo (with reported standard error)
    otherwise.  f must be vectorized over (m, d) point arrays.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    spec = KernelSpec(case, 1.0 / c, T, x)
    mean, cov = kernel_mean_cov(spec)
    mc_se = None
    if method == "auto":
        method = "quad" if d <= 2 else "mc"
    if method == "quad":
        widths = np.sqrt(np.diag(cov))
        if d == 1:
            gamma_term = adaptive_1d(
                lambda u: float(
                    f(np.array([[u]]))[0] * kernel_density(spec, np.array([u]))
                ),
                mean[0] - 12.0 * widths[0],
                mean[0] + 12.0 * widths[0],
                tol=1e-9,
            )
        elif d == 2:
            box = [
                (mean[0] - 10.0 * widths[0], mean[0] + 10.0 * widths[0]),
                (mean[1] - 10.0 * widths[1], mean[1] + 10.0 * widths[1]),
            ]
            # composite panels keep kinks in f (norms) from stalling the rule
            gamma_term = tensor_quad_2d(
                lambda pts: np.asarray(f(pts)) * kernel_density(spec, pts),
                box,
                n_per_dim=40,
                check_tol=1e-6,
                panels=8,
            )
        else:
            raise ArgumentError("quadrature mean needs d <= 2")
    else:
        rng = np.random.default_rng(seed)
        vals = np.asarray(f(sample_kernel(spec, rng, mc_samples)), dtype=float)
        gamma_term = float(vals.mean())
        mc_se = float(vals.std(ddof=1) / math.sqrt(mc_samples))

    dirs = unit_directions(d, n_directions, seed=seed)
    floor = float(np.min(np.asarray(f(growth.rho0 * dirs), dtype=float)))
    value = (
        (1.0 + math.sqrt(2.0)) * math.sqrt(alpha * math.log(C))
        + gamma_term
        + growth.rho0 * growth.beta
        - floor
    )
    return LowerBias(value=value, gamma_term=float(gamma_term), floor=floor, mc_se=mc_se)


def relative_entropy_1d(m, q, support) -> float:
    """KL-type entropy integral of m log(m/q) over the support interval."""
    lo, hi = support
    probe = np.linspace(lo, hi, 201)
    mv = np.array([m(t) for t in probe], dtype=float)
    qv = np.array([q(t) for t in probe], dtype=float)
    if np.any(mv < 0) or np.any(qv < 0):
        raise ArgumentError("densities must be nonnegative on the support")

    def integrand(t):
        mt = m(t)
        qt = q(t)
        if mt <= 0.0:
            return 0.0
        if qt <= 0.0:
            raise ArgumentError("dominating density vanishes where m > 0")
        return mt * math.log(mt / qt)

    return adaptive_1d(integrand, lo, hi, tol=1e-9)


@dataclass(frozen=True)
class MgfCheckReport:
    lambdas: np.ndarray
    margins: np.ndarray  # log empirical MGF minus the certified bound, <= 0 ok
    bootstrap_se: np.ndarray
    max_violation: float
    alpha: float
    kappa: float


def empirical_mgf_check(
    batch: TerminalBatch,
    f,
    alpha: float,
    kappa: float,
    lambda_grid,
    n_bootstrap: int = 100,
    seed: int = 0,
) -> MgfCheckReport:
    """Compare the empirical log-MGF of f against the certified envelope.

    For each lambda the margin is log E_hat[e^{lambda F}] minus
    (lambda mean_hat + alpha lambda^2 / 4 + lambda W1 + log kappa); negative
    margins are consistent with the envelope.  Bootstrap standard errors
    accompany each margin.
    """
    if kappa < 1:
        raise ArgumentError("kappa must be >= 1")
    lambdas = np.atleast_1d(np.asarray(lambda_grid, dtype=float))
    vals = np.asarray(f(batch.samples), dtype=float)
    spread = float(vals.max() - vals.min())
    if np.any(np.abs(lambdas) * spread >= 20.0):
        raise LambdaTooLargeError(
            f"lambda * spread = {np.abs(lambdas).max() * spread:.1f} >= 20"
        )
    y = vals - vals.mean()
    M = y.shape[0]
    w1 = wasserstein_bound(alpha, kappa)
    certified = alpha * lambdas**2 / 4.0 + lambdas * w1 + math.log(kappa)
    log_mgf = logsumexp(np.outer(lambdas, y), axis=1) - math.log(M)
    margins = log_mgf - certified

    rng = np.random.default_rng(seed)
    ex = np.exp(np.outer(lambdas, y))
    boot = np.empty((n_bootstrap, lambdas.shape[0]))
    for b in range(n_bootstrap):
        idx = rng.integers(0, M, size=M)
        yb = y[idx]
        boot[b] = np.log(ex[:, idx].mean(axis=1)) - lambdas * yb.mean() - certified
    se = boot.std(axis=0, ddof=1)
    return MgfCheckReport(
        lambdas=lambdas,
        margins=margins,
        bootstrap_se=se,
        max_violation=float(margins.max()),
        alpha=alpha,
        kappa=kappa,
    )


@dataclass(frozen=True)
class UpperBound:
    """Upper deviation bound data: P(|dev| >= r + bias) <= 2 e^{-M r^2/alpha}."""

    case: Case
    gauss: GaussParams
    T: float
    alpha: float
    bias: float


def upper_bound(case: Case, gauss: GaussParams, T: float) -> UpperBound:
    alpha = concentration_alpha(case, gauss.c, T)
    return UpperBound(
        case=case, gauss=gauss, T=T, alpha=alpha, bias=domination_bias(gauss.C, alpha)
    )


@dataclass(frozen=True)
class LowerBound:
    """Lower deviation bound data, assembled under a growth assumption."""

    case: Case
    gauss: GaussParams
    T: float
    growth: GrowthSpec
    rate: LowerRate
    bias: LowerBias


def lower_bound(
    case: Case,
    d: int,
    gauss: GaussParams,
    T: float,
    growth: GrowthSpec,
    f,
    x,
    theta: float | None = None,
    mode: str = "reduced",
    **bias_kwargs,
) -> LowerBound:
    if case is not Case.KINETIC and d % 2 == 1 and theta is None:
        theta = 2.0
    if mode == "reduced":
        rate = lower_rate(case, d, gauss.c, T, growth.rho0, gauss.C, growth.cone_measure, theta=theta)
    elif mode == "full":
        rate = lower_rate_full(
            case, d, gauss.c, T, growth.rho0, gauss.C, growth.cone_measure, x, theta=theta
        )
    else:
        raise ArgumentError("mode must be 'reduced' or 'full'")
    alpha = concentration_alpha(case, gauss.c, T)
    bias = lower_bias(case, gauss.c, gauss.C, T, alpha, f, x, growth, d, **bias_kwargs)
    return LowerBound(case=case, gauss=gauss, T=T, growth=growth, rate=rate, bias=bias)
