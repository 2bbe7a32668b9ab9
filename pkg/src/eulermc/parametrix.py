"""Discrete parametrix density engine for scalar non-degenerate schemes.

The multi-step transition density of the scheme is expanded as

    p(t_j, t_j', x, .) = sum_{r >= 0} (ptilde (x)_D H^{(r)})(t_j, t_j', x, .),

where ptilde is the Gaussian density of the scheme with coefficients frozen
at the terminal spatial argument, H is the one-step defect kernel between
the true and frozen schemes, H^{(r)} its r-fold time-space convolution, and
(x)_D the discrete convolution: a step-weighted time sum combined with a
spatial integral.  Conventions: the frozen density at zero elapsed time is
the point mass at the start (handled exactly, never discretized), singular
kernels vanish at coincident times, and H^{(r)} vanishes on spans shorter
than r steps.  Under these conventions the series truncated at r = j' - j
reproduces the Chapman-Kolmogorov composition exactly, up to spatial
quadrature.

Spatial integrals use trapezoid weights on a uniform truncated grid; for
Gaussian-type integrands that is spectrally accurate, so truncation
dominates the error budget.  Only the one-dimensional non-degenerate case
is treated; kinetic parametrix tables would need quadrature in 2 d'
dimensions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft

from .errors import ArgumentError, DivergenceWarning, TruncationError
from .gaussianref import KernelSpec, kernel_density
from .model import Case, GaussParams, SdeModel, SchemeGrid
from .quadrature import trapezoid_weights


@dataclass(frozen=True)
class Grid1D:
    """Uniform spatial grid on [lo, hi] with n_points nodes."""

    lo: float
    hi: float
    n_points: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ArgumentError("grid needs lo < hi")
        if self.n_points < 3:
            raise ArgumentError("grid needs at least three points")

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.n_points - 1)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_points)

    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.n_points, self.h)

    @classmethod
    def centered(cls, center: float, half_width: float, n_points: int) -> "Grid1D":
        n_points = int(n_points) | 1  # odd, so the center is a node
        return cls(center - half_width, center + half_width, n_points)


def default_grid(
    model: SdeModel, tgrid: SchemeGrid, x: float, n_points: int = 601, radius: float = 10.0
) -> Grid1D:
    """Grid wide enough for the terminal density: radius standard deviations
    of the most diffusive coefficient plus the drift-bound displacement."""
    half = radius * math.sqrt(model.lambda0 * tgrid.T) + model.L0 * tgrid.T
    return Grid1D.centered(float(x), half, n_points)


@dataclass
class DensityTable:
    """Tabulated values between two grid times.

    values is either a vector (fixed start, targets on the grid) or a full
    matrix (starts on grid rows, targets on grid columns).  Signed tables
    (kernels) must be flagged so normalization checks skip them.
    """

    grid: Grid1D
    j: int
    j_prime: int
    values: np.ndarray
    start_x: float | None = None
    signed: bool = False

    def mass(self) -> float:
        if self.values.ndim != 1:
            raise ArgumentError("mass is defined for vector tables")
        return float(self.grid.weights() @ self.values)

    def to_csv(self, path, config_hash: str | None = None) -> None:
        pts = self.grid.points
        with open(path, "w") as fh:
            if config_hash is not None:
                fh.write(f"# config-hash: {config_hash}\n")
            if self.values.ndim == 1:
                fh.write("x_prime,value\n")
                for xp, v in zip(pts, self.values):
                    fh.write(f"{xp:.17g},{v:.17g}\n")
            else:
                fh.write("x,x_prime,value\n")
                for i, xi in enumerate(pts):
                    for k, xk in enumerate(pts):
                        fh.write(f"{xi:.17g},{xk:.17g},{self.values[i, k]:.17g}\n")


@dataclass(frozen=True)
class TimeSliceTable:
    """Slices g(t_j, t_{j+k}, start_x, .) for k = 0 .. K-1 on one grid.

    Row 0 is ignored when start_dirac is set: densities at zero elapsed time
    are the point mass at start_x and enter convolutions exactly.
    """

    grid: Grid1D
    start_x: float
    slices: np.ndarray  # (K, n_points)
    start_dirac: bool = True


def _check_1d_case_a(model: SdeModel) -> None:
    if model.case is not Case.NONDEGENERATE or model.d != 1:
        raise ArgumentError("parametrix tables cover the scalar non-degenerate case")


def _gauss(y, mean, var):
    return np.exp(-((y - mean) ** 2) / (2.0 * var)) / np.sqrt(2.0 * math.pi * var)


def _coeffs(model: SdeModel, t: float, pts: np.ndarray):
    """Drift and diffusion values along a vector of scalar points."""
    xs = np.asarray(pts, dtype=float).reshape(-1, 1)
    b = np.asarray(model.drift(t, xs), dtype=float).reshape(-1)
    a = np.asarray(model.diffusion(t, xs), dtype=float).reshape(-1)
    return b, a


def one_step_density(model: SdeModel, tgrid: SchemeGrid, j: int, x: float, xp):
    """Scheme one-step density: Gaussian with mean x + b(t_j, x) delta and
    variance a(t_j, x) delta, evaluated at xp (vectorized over xp)."""
    _check_1d_case_a(model)
    b, a = _coeffs(model, tgrid.times[j], np.array([x]))
    return _gauss(np.asarray(xp, dtype=float), x + b[0] * tgrid.delta, a[0] * tgrid.delta)


def _frozen_sums(model: SdeModel, tgrid: SchemeGrid, j: int, j_prime: int, at: np.ndarray):
    """Accumulated frozen drift and variance over steps j .. j'-1, frozen at
    the points in `at`."""
    drift_sum = np.zeros_like(at, dtype=float)
    var_sum = np.zeros_like(at, dtype=float)
    for i in range(j, j_prime):
        b, a = _coeffs(model, tgrid.times[i], at)
        drift_sum += b * tgrid.delta
        var_sum += a * tgrid.delta
    return drift_sum, var_sum


def frozen_density(model: SdeModel, tgrid: SchemeGrid, j: int, j_prime: int, x: float, xp):
    """Density at xp of the scheme with coefficients frozen at xp.

    Gaussian with mean x + sum_i b(t_i, xp) delta and variance
    sum_i a(t_i, xp) delta over i = j .. j'-1 (vectorized over xp).
    """
    _check_1d_case_a(model)
    if not 0 <= j < j_prime <= tgrid.N:
        raise ArgumentError("need 0 <= j < j' <= N")
    xp = np.asarray(xp, dtype=float)
    scalar = xp.ndim == 0
    flat = np.atleast_1d(xp)
    drift_sum, var_sum = _frozen_sums(model, tgrid, j, j_prime, flat)
    vals = _gauss(flat, x + drift_sum, var_sum)
    return float(vals[0]) if scalar else vals


def _one_step_matrix(model: SdeModel, tgrid: SchemeGrid, k: int, pts: np.ndarray):
    """Q[u, w] = one-step density from pts[u] evaluated at pts[w]."""
    b, a = _coeffs(model, tgrid.times[k], pts)
    mean = pts + b * tgrid.delta
    var = a * tgrid.delta
    return _gauss(pts[None, :], mean[:, None], var[:, None])


def _frozen_onestep_shift_kernels(model, tgrid, k, pts):
    """g_z over displacements: G[z, m + n - 1] = density of one frozen-at-z
    step at displacement h * m, m in [-(n-1), n-1]."""
    n = pts.shape[0]
    h = pts[1] - pts[0]
    b, a = _coeffs(model, tgrid.times[k], pts)
    disp = h * np.arange(-(n - 1), n)
    return _gauss(disp[None, :], (b * tgrid.delta)[:, None], (a * tgrid.delta)[:, None])


def _frozen_tail(model, tgrid, k1, k2, pts):
    """psi[w, z] = frozen-at-z density from pts[w] to pts[z] over t_{k1}..t_{k2}."""
    drift_sum, var_sum = _frozen_sums(model, tgrid, k1, k2, pts)
    diff = pts[None, :] - pts[:, None]  # [w, z] = z - w
    return _gauss(diff, drift_sum[None, :], var_sum[None, :])


def _toeplitz_apply(G: np.ndarray, A: np.ndarray) -> np.ndarray:
    """T[u, z] = sum_w A[w, z] * G[z, (w - u) + n - 1] via batched FFT."""
    n, nz = A.shape
    L = next_fast_len(3 * n - 2)
    fa = rfft(A, L, axis=0)
    fs = rfft(G[:, ::-1].T, L, axis=0)
    full = irfft(fa * fs, L, axis=0)
    return full[n - 1 : 2 * n - 1, :]


def defect_kernel(
    model: SdeModel,
    tgrid: SchemeGrid,
    j: int,
    j_prime: int,
    x: float,
    xp: float,
    grid: Grid1D,
) -> float:
    """One point of the defect kernel H between true and frozen schemes.

    For a single step this is (p - ptilde)/delta at (x, xp).  For longer
    spans it is the spatial integral of the one-step defect from x against
    the frozen tail into xp, divided by delta; the integral runs over the
    truncated grid and the one-step mass retained on the grid must exceed
    1 - 1e-6.
    """
    _check_1d_case_a(model)
    if not 0 <= j < j_prime <= tgrid.N:
        raise ArgumentError("need 0 <= j < j' <= N")
    delta = tgrid.delta
    if j_prime == j + 1:
        p = one_step_density(model, tgrid, j, x, xp)
        b, a = _coeffs(model, tgrid.times[j], np.array([xp]))
        ptilde = _gauss(np.asarray(xp, float), x + b[0] * delta, a[0] * delta)
        return float(p - ptilde) / delta
    pts = grid.points
    tw = grid.weights()
    p_row = one_step_density(model, tgrid, j, x, pts)
    retained = float(tw @ p_row)
    if abs(retained - 1.0) > 1e-6:
        raise TruncationError(
            f"one-step mass truncation {abs(retained - 1.0):.2e} exceeds 1e-6"
        )
    b, a = _coeffs(model, tgrid.times[j], np.array([xp]))
    ptilde_row = _gauss(pts, x + b[0] * delta, a[0] * delta)
    drift_sum, var_sum = _frozen_sums(model, tgrid, j + 1, j_prime, np.array([xp]))
    tail = _gauss(xp, pts + drift_sum[0], var_sum[0])
    return float(tw @ ((p_row - ptilde_row) * tail)) / delta


def _kernel_table(model, tgrid, k, m, pts, tw, Qk, Gk):
    """H(t_k, t_m, ., .) on the grid, shape (n_start, n_target)."""
    n = pts.shape[0]
    delta = tgrid.delta
    if m == k + 1:
        idx = np.arange(n)[None, :] - np.arange(n)[:, None] + (n - 1)
        frozen = Gk[np.broadcast_to(np.arange(n)[None, :], idx.shape), idx]
        return (Qk - frozen) / delta
    psi = _frozen_tail(model, tgrid, k + 1, m, pts)
    A = tw[:, None] * psi
    return (Qk @ A - _toeplitz_apply(Gk, A)) / delta


def _kernel_row(model, tgrid, j, m, x, pts, tw):
    """H(t_j, t_m, x, .) along the grid for an arbitrary start point x."""
    delta = tgrid.delta
    b_z, a_z = _coeffs(model, tgrid.times[j], pts)
    if m == j + 1:
        p = one_step_density(model, tgrid, j, x, pts)
        ptilde = _gauss(pts, x + b_z * delta, a_z * delta)
        return (p - ptilde) / delta
    q_row = one_step_density(model, tgrid, j, x, pts)  # over w
    frozen = _gauss(pts[None, :], x + (b_z * delta)[:, None], (a_z * delta)[:, None])
    psi = _frozen_tail(model, tgrid, j + 1, m, pts)  # [w, z]
    Aw = tw[:, None] * psi
    term1 = (tw * q_row) @ psi
    term2 = np.einsum("zw,wz->z", frozen, Aw)
    return (term1 - term2) / delta


def discrete_convolution(
    g: TimeSliceTable,
    f_kernel,
    tgrid: SchemeGrid,
    j: int,
    j_prime: int,
    grid: Grid1D,
) -> DensityTable:
    """Discrete convolution (g (x)_D f)(t_j, t_{j'}, start, .) on the grid.

    f_kernel(k, u_points, xp_points) must return the (len(u), len(xp)) array
    of f(t_{j+k}, t_{j'}, u, xp).  Time summation is exact (step-weighted);
    spatial integrals use trapezoid weights.  The zero-span convolution is
    the zero table by convention.
    """
    if g.grid != grid:
        raise ArgumentError("slice table and output grid must match")
    pts = grid.points
    if j_prime == j:
        return DensityTable(grid, j, j_prime, np.zeros(grid.n_points), g.start_x, signed=True)
    if j_prime < j:
        raise ArgumentError("need j <= j'")
    tw = grid.weights()
    delta = tgrid.delta
    out = np.zeros(grid.n_points)
    for k in range(j_prime - j):
        if k == 0 and g.start_dirac:
            out += delta * np.asarray(
                f_kernel(0, np.array([g.start_x]), pts), dtype=float
            ).reshape(grid.n_points)
            continue
        row = g.slices[k]
        out += delta * ((tw * row) @ np.asarray(f_kernel(k, pts, pts), dtype=float))
    return DensityTable(grid, j, j_prime, out, g.start_x, signed=True)


def check_term_decay(norms) -> None:
    """Warn when sup norms stop decaying beyond the first correction term;
    term growth there means the grid or its truncation is unusable."""
    for r in range(2, len(norms)):
        if norms[r] > norms[r - 1] > 0.0:
            warnings.warn(
                f"series term {r} ({norms[r]:.3e}) exceeds term {r - 1} "
                f"({norms[r - 1]:.3e})",
                DivergenceWarning,
            )


def parametrix_series(
    model: SdeModel,
    tgrid: SchemeGrid,
    j: int,
    j_prime: int,
    x: float,
    grid: Grid1D,
    r_max: int = 3,
):
    """Truncated parametrix series for p(t_j, t_{j'}, x, .) on the grid.

    Returns (DensityTable, per-term sup norms, terms).  Terms beyond r = 1
    whose sup norm stops decaying trigger a DivergenceWarning: the grid or
    its truncation is then suspect.
    """
    _check_1d_case_a(model)
    steps = j_prime - j
    if not 0 <= j < j_prime <= tgrid.N:
        raise ArgumentError("need 0 <= j < j' <= N")
    if not 0 <= r_max <= steps:
        raise ArgumentError("need 0 <= r_max <= j' - j")
    pts = grid.points
    tw = grid.weights()
    delta = tgrid.delta
    n = grid.n_points

    terms = [frozen_density(model, tgrid, j, j_prime, x, pts)]
    if r_max >= 1:
        # pair tables H(t_k, t_m) between interior grid times
        hpair: dict[tuple[int, int], np.ndarray] = {}
        for k in range(j + 1, j_prime):
            Qk = _one_step_matrix(model, tgrid, k, pts)
            Gk = _frozen_onestep_shift_kernels(model, tgrid, k, pts)
            for m in range(k + 1, j_prime + 1):
                hpair[(k, m)] = _kernel_table(model, tgrid, k, m, pts, tw, Qk, Gk)
        hrow = {
            m: _kernel_row(model, tgrid, j, m, x, pts, tw)
            for m in range(j + 1, j_prime + 1)
        }
        rho = {
            k: frozen_density(model, tgrid, j, k, x, pts)
            for k in range(j + 1, j_prime)
        }

        S = {k: hpair[(k, j_prime)] for k in range(j + 1, j_prime)}
        srow = hrow[j_prime]
        for r in range(1, r_max + 1):
            term = delta * srow.copy()
            for k in range(j + 1, j_prime):
                if k in S:
                    term = term + delta * ((tw * rho[k]) @ S[k])
            terms.append(term)
            if r == r_max:
                break
            S_next: dict[int, np.ndarray] = {}
            for k in range(j + 1, j_prime - r):
                acc = np.zeros((n, n))
                for m in range(k + 1, j_prime - r + 1):
                    if m in S:
                        acc += delta * (hpair[(k, m)] @ (tw[:, None] * S[m]))
                S_next[k] = acc
            srow_next = np.zeros(n)
            for m in range(j + 1, j_prime - r + 1):
                if m in S:
                    srow_next += delta * ((hrow[m] * tw) @ S[m])
            S = S_next
            srow = srow_next

    norms = [float(np.max(np.abs(t))) for t in terms]
    check_term_decay(norms)
    table = DensityTable(grid, j, j_prime, np.sum(terms, axis=0), start_x=x)
    return table, norms, terms


def chapman_kolmogorov_density(
    model: SdeModel,
    tgrid: SchemeGrid,
    j: int,
    j_prime: int,
    x: float,
    grid: Grid1D,
    mass_tol: float = 1e-8,
) -> DensityTable:
    """Iterated one-step composition of the scheme density on the grid.

    Matrix products with trapezoid weights; the density-weighted mass lost
    off the grid at each step must stay below mass_tol.
    """
    _check_1d_case_a(model)
    if not 0 <= j < j_prime <= tgrid.N:
        raise ArgumentError("need 0 <= j < j' <= N")
    pts = grid.points
    tw = grid.weights()
    dens = one_step_density(model, tgrid, j, x, pts)
    loss = abs(float(tw @ dens) - 1.0)
    if loss > mass_tol:
        raise TruncationError(f"initial step loses mass {loss:.2e} > {mass_tol:.0e}")
    for k in range(j + 1, j_prime):
        Q = _one_step_matrix(model, tgrid, k, pts)
        row_mass = Q @ tw
        step_loss = float(tw @ (dens * (1.0 - row_mass)))
        if step_loss > mass_tol:
            raise TruncationError(
                f"step {k} loses mass {step_loss:.2e} > {mass_tol:.0e}"
            )
        dens = (tw * dens) @ Q
    return DensityTable(grid, j, j_prime, dens, start_x=x)


@dataclass(frozen=True)
class EnvelopeReport:
    sup_ratio: float  # sup of table / p_c
    inf_ratio: float  # inf of table / p_{1/c}
    holds: bool
    n_points: int


def envelope_check(
    table: DensityTable,
    gauss: GaussParams,
    t_elapsed: float,
    x: float,
    floor: float = 1e-10,
    tol: float = 1e-9,
) -> EnvelopeReport:
    """Two-sided Gaussian envelope check on a probability table.

    Over grid points carrying density above `floor`, computes
    sup table / p_c and inf table / p_{1/c}; the envelope
    C^{-1} p_{1/c} <= table <= C p_c holds iff sup <= C and inf >= 1/C,
    up to the relative roundoff slack tol.
    """
    if table.signed:
        raise ArgumentError("envelope checks apply to probability tables")
    if table.values.ndim != 1:
        raise ArgumentError("envelope checks need a vector table")
    pts = table.grid.points[:, None]
    upper = kernel_density(
        KernelSpec(Case.NONDEGENERATE, gauss.c, t_elapsed, np.array([x])), pts
    )
    lower = kernel_density(
        KernelSpec(Case.NONDEGENERATE, 1.0 / gauss.c, t_elapsed, np.array([x])), pts
    )
    mask = table.values > floor
    if not np.any(mask):
        raise ArgumentError("no grid point carries density above the floor")
    sup_ratio = float(np.max(table.values[mask] / upper[mask]))
    inf_ratio = float(np.min(table.values[mask] / lower[mask]))
    holds = sup_ratio <= gauss.C * (1.0 + tol) and inf_ratio >= (1.0 - tol) / gauss.C
    return EnvelopeReport(
        sup_ratio=sup_ratio,
        inf_ratio=inf_ratio,
        holds=holds,
        n_points=int(mask.sum()),
    )


def frozen_slices(
    model: SdeModel, tgrid: SchemeGrid, j: int, j_prime: int, x: float, grid: Grid1D
) -> TimeSliceTable:
    """Frozen densities ptilde(t_j, t_{j+k}, x, .) as convolution input."""
    K = j_prime - j
    pts = grid.points
    slices = np.zeros((K, grid.n_points))
    for k in range(1, K):
        slices[k] = frozen_density(model, tgrid, j, j + k, x, pts)
    return TimeSliceTable(grid=grid, start_x=float(x), slices=slices, start_dirac=True)
