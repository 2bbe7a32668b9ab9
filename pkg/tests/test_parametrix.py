import math

import numpy as np
import pytest

from eulermc.errors import ArgumentError, TruncationError
from eulermc.model import GaussParams, SchemeGrid, model_preset
from eulermc.parametrix import (
    DensityTable,
    Grid1D,
    TimeSliceTable,
    chapman_kolmogorov_density,
    default_grid,
    defect_kernel,
    discrete_convolution,
    envelope_check,
    frozen_density,
    frozen_slices,
    one_step_density,
    parametrix_series,
)
from eulermc.simulate import RngSpec, simulate_terminal


CONST = model_preset("const", d=1, b0=0.0, sigma0=1.0)
TRIG = model_preset("trig", a_amp=0.1)


def gauss(y, mean, var):
    return math.exp(-((y - mean) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var)


def test_grid_basics():
    g = Grid1D(-1.0, 1.0, 5)
    assert g.h == 0.5
    assert np.allclose(g.points, [-1, -0.5, 0, 0.5, 1])
    assert g.weights().sum() == pytest.approx(2.0)
    with pytest.raises(ArgumentError):
        Grid1D(1.0, -1.0, 5)
    centered = Grid1D.centered(0.3, 1.0, 10)
    assert centered.n_points == 11
    assert np.isclose(centered.points, 0.3).any()


def test_frozen_density_constant_coefficients_is_scheme_density():
    m = model_preset("const", d=1, b0=0.4, sigma0=1.3)
    tg = SchemeGrid(T=1.0, N=5)
    xs = np.linspace(-3, 3, 11)
    for j, jp in [(0, 1), (0, 5), (2, 4)]:
        span = (jp - j) * tg.delta
        want = [gauss(x, 0.7 + 0.4 * span, 1.69 * span) for x in xs]
        got = frozen_density(m, tg, j, jp, 0.7, xs)
        assert np.allclose(got, want, rtol=1e-14)


def test_frozen_density_time_dependent_variance_sum():
    # a(t) = 1 + t/2 frozen anywhere: variance is sum (1 + t_i/2) delta
    def sigma(t, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1] + (1, 1), math.sqrt(1.0 + t / 2.0))

    from eulermc.model import Case, SdeModel

    m = SdeModel(Case.NONDEGENERATE, 1, lambda t, x: np.zeros_like(x), sigma, 2.0, 1.0, 1.0)
    tg = SchemeGrid(T=1.0, N=8)
    j, jp = 1, 7
    var = sum((1.0 + tg.times[i] / 2.0) * tg.delta for i in range(j, jp))
    got = frozen_density(m, tg, j, jp, 0.0, np.array([0.9]))
    assert got[0] == pytest.approx(gauss(0.9, 0.0, var), rel=1e-14)


def test_one_step_density_properties():
    tg = SchemeGrid(T=1.0, N=10)
    grid = Grid1D(-4, 4, 801)
    vals = one_step_density(TRIG, tg, 0, 0.0, grid.points)
    # symmetric about the mean (zero drift at x = 0)
    assert np.allclose(vals, vals[::-1], rtol=1e-12)
    assert float(grid.weights() @ vals) == pytest.approx(1.0, abs=1e-8)


def test_one_step_density_matches_simulation_histogram():
    m = model_preset("trig", a_amp=0.2, b_amp=0.3)
    tg = SchemeGrid(T=1.0, N=4)
    n = 1_000_000
    batch = simulate_terminal(m, SchemeGrid(T=0.25, N=1), [0.3], RngSpec(2024), n)
    edges = np.linspace(-1.6, 2.2, 201)
    counts, _ = np.histogram(batch.samples[:, 0], bins=edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    width = edges[1] - edges[0]
    dens = one_step_density(m, tg, 0, 0.3, centers)
    expected = dens * n * width
    # 3 standard errors per bin, Poisson scale
    bad = np.abs(counts - expected) > 3.0 * np.sqrt(np.maximum(expected, 1.0))
    assert bad.mean() < 0.01


def test_defect_kernel_zero_for_constant_coefficients():
    tg = SchemeGrid(T=1.0, N=5)
    grid = Grid1D(-8, 8, 401)
    for jp in (1, 3, 5):
        assert defect_kernel(CONST, tg, 0, jp, 0.2, -0.5, grid) == pytest.approx(
            0.0, abs=1e-14
        )


def test_defect_kernel_single_step_closed_form():
    # b = 0, a(x) = 1 + 0.1 sin x: difference of two explicit Gaussians
    tg = SchemeGrid(T=1.0, N=10)
    grid = Grid1D(-8, 8, 401)
    delta = tg.delta
    for xp in (0.0, 0.5, 1.0):
        want = (gauss(xp, 0.0, delta) - gauss(xp, 0.0, (1 + 0.1 * math.sin(xp)) * delta)) / delta
        got = defect_kernel(TRIG, tg, 0, 1, 0.0, xp, grid)
        assert got == pytest.approx(want, abs=1e-12)


def test_defect_kernel_mass_nearly_cancels():
    # the true one-step density has unit mass; the frozen one is evaluated
    # with parameters that vary with the target, so its mass is 1 + O(delta)
    # and the kernel's signed mass is small against its absolute mass
    tg = SchemeGrid(T=1.0, N=10)
    grid = Grid1D(-6, 6, 1201)
    vals = np.array([defect_kernel(TRIG, tg, 0, 1, 0.0, xp, grid) for xp in grid.points])
    signed = abs(float(grid.weights() @ vals))
    total = float(grid.weights() @ np.abs(vals))
    assert signed < 1e-2
    assert signed < 0.05 * total


def test_defect_kernel_truncation_guard():
    tg = SchemeGrid(T=1.0, N=5)
    narrow = Grid1D(-0.5, 0.5, 51)
    with pytest.raises(TruncationError):
        defect_kernel(TRIG, tg, 0, 3, 0.0, 0.1, narrow)


def test_discrete_convolution_zero_kernel():
    tg = SchemeGrid(T=1.0, N=4)
    grid = Grid1D(-5, 5, 101)
    g = frozen_slices(TRIG, tg, 0, 4, 0.0, grid)
    out = discrete_convolution(g, lambda k, u, xp: np.zeros((len(u), len(xp))), tg, 0, 4, grid)
    assert np.all(out.values == 0.0)


def test_discrete_convolution_linearity():
    tg = SchemeGrid(T=1.0, N=4)
    grid = Grid1D(-5, 5, 101)
    g = frozen_slices(TRIG, tg, 0, 4, 0.0, grid)

    def kern(k, u, xp):
        u = np.asarray(u)[:, None]
        return np.exp(-np.asarray(xp)[None, :] ** 2 - 0.1 * u**2)

    a = discrete_convolution(g, kern, tg, 0, 4, grid).values
    b = discrete_convolution(
        g, lambda k, u, xp: 3.5 * kern(k, u, xp), tg, 0, 4, grid
    ).values
    assert np.allclose(b, 3.5 * a, rtol=1e-13)


def test_discrete_convolution_grid_delta_scaling():
    # a grid point mass at each time slice collapses the spatial integral,
    # so a time-constant g accumulates (j' - j) * delta * g
    tg = SchemeGrid(T=1.0, N=4)
    grid = Grid1D(-1, 1, 3)  # 3-point grid, by-hand summation
    psi = np.array([0.2, 1.0, 0.4])
    slices = np.vstack([psi, psi, psi, psi])
    g = TimeSliceTable(grid=grid, start_x=0.0, slices=slices, start_dirac=False)
    tw = grid.weights()

    def point_mass(k, u, xp):
        out = np.zeros((len(u), len(xp)))
        for i, uu in enumerate(np.asarray(u)):
            j = int(np.argmin(np.abs(np.asarray(xp) - uu)))
            out[i, j] = 1.0 / tw[j]
        return out

    out = discrete_convolution(g, point_mass, tg, 0, 4, grid).values
    want = 4 * tg.delta * psi  # = T * psi on the nodes
    assert np.allclose(out, want, rtol=1e-12)


def test_discrete_convolution_zero_span_convention():
    tg = SchemeGrid(T=1.0, N=4)
    grid = Grid1D(-5, 5, 101)
    g = frozen_slices(TRIG, tg, 0, 4, 0.0, grid)
    out = discrete_convolution(g, lambda k, u, xp: np.ones((len(u), len(xp))), tg, 2, 2, grid)
    assert np.all(out.values == 0.0)


def test_discrete_convolution_grid_mismatch():
    tg = SchemeGrid(T=1.0, N=4)
    g = frozen_slices(TRIG, tg, 0, 4, 0.0, Grid1D(-5, 5, 101))
    with pytest.raises(ArgumentError):
        discrete_convolution(
            g, lambda k, u, xp: np.zeros((len(u), len(xp))), tg, 0, 4, Grid1D(-4, 4, 101)
        )


def test_series_constant_coefficients_exact():
    tg = SchemeGrid(T=1.0, N=5)
    grid = default_grid(CONST, tg, 0.0, 401, 8.0)
    table, norms, _ = parametrix_series(CONST, tg, 0, 5, 0.0, grid, r_max=3)
    exact = np.exp(-grid.points**2 / 2) / math.sqrt(2 * math.pi)
    assert np.max(np.abs(table.values - exact)) < 1e-8
    assert all(n < 1e-12 for n in norms[1:])


def test_series_matches_chapman_kolmogorov():
    tg = SchemeGrid(T=1.0, N=10)
    grid = default_grid(TRIG, tg, 0.0, 600, 10.0)
    table, norms, _ = parametrix_series(TRIG, tg, 0, 10, 0.0, grid, r_max=3)
    ck = chapman_kolmogorov_density(TRIG, tg, 0, 10, 0.0, grid)
    rel = np.max(np.abs(table.values - ck.values)) / np.max(ck.values)
    assert rel < 1e-2
    # term sup norms decay beyond r = 1
    assert norms[2] < norms[1]
    assert norms[3] < norms[2]
    assert table.mass() == pytest.approx(1.0, abs=1e-6)


def test_series_full_order_agrees_with_ck_tightly():
    tg = SchemeGrid(T=1.0, N=6)
    grid = default_grid(TRIG, tg, 0.0, 401, 9.0)
    table, _, _ = parametrix_series(TRIG, tg, 0, 6, 0.0, grid, r_max=6)
    ck = chapman_kolmogorov_density(TRIG, tg, 0, 6, 0.0, grid)
    rel = np.max(np.abs(table.values - ck.values)) / np.max(ck.values)
    assert rel < 1e-6


def test_series_interior_window():
    tg = SchemeGrid(T=1.0, N=8)
    grid = default_grid(TRIG, tg, 0.3, 401, 9.0)
    table, _, _ = parametrix_series(TRIG, tg, 2, 7, 0.3, grid, r_max=3)
    ck = chapman_kolmogorov_density(TRIG, tg, 2, 7, 0.3, grid)
    rel = np.max(np.abs(table.values - ck.values)) / np.max(ck.values)
    assert rel < 1e-2


def test_series_r_max_validation():
    tg = SchemeGrid(T=1.0, N=4)
    grid = Grid1D(-5, 5, 101)
    with pytest.raises(ArgumentError):
        parametrix_series(TRIG, tg, 0, 4, 0.0, grid, r_max=5)


def test_ck_single_step_is_one_step_density():
    tg = SchemeGrid(T=1.0, N=4)
    grid = Grid1D(-6, 6, 501)
    table = chapman_kolmogorov_density(TRIG, tg, 1, 2, 0.1, grid)
    assert np.allclose(table.values, one_step_density(TRIG, tg, 1, 0.1, grid.points))


def test_ck_constant_coefficients_exact_gaussian():
    tg = SchemeGrid(T=1.0, N=8)
    grid = default_grid(CONST, tg, 0.0, 501, 9.0)
    table = chapman_kolmogorov_density(CONST, tg, 0, 8, 0.0, grid)
    exact = np.exp(-grid.points**2 / 2) / math.sqrt(2 * math.pi)
    assert np.max(np.abs(table.values - exact)) < 1e-8


def test_ck_matches_simulation_histogram():
    m = model_preset("trig", a_amp=0.2, b_amp=0.2)
    tg = SchemeGrid(T=1.0, N=5)
    grid = default_grid(m, tg, 0.0, 501, 9.0)
    table = chapman_kolmogorov_density(m, tg, 0, 5, 0.0, grid)
    n = 1_000_000
    batch = simulate_terminal(m, tg, [0.0], RngSpec(909), n)
    edges = np.linspace(-3.5, 3.5, 141)
    counts, _ = np.histogram(batch.samples[:, 0], bins=edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    width = edges[1] - edges[0]
    expected = np.interp(centers, grid.points, table.values) * n * width
    bad = np.abs(counts - expected) > 3.0 * np.sqrt(np.maximum(expected, 1.0))
    assert bad.mean() < 0.01


def test_ck_truncation_guard():
    tg = SchemeGrid(T=1.0, N=4)
    with pytest.raises(TruncationError):
        chapman_kolmogorov_density(TRIG, tg, 0, 4, 0.0, Grid1D(-1.0, 1.0, 101))


def test_kernel_decay_weighted_by_reference():
    # |H|(t_j, t_j') (t_{j'} - t_j)^{1 - eta/2} / p_cfit stays bounded on the grid
    tg = SchemeGrid(T=1.0, N=10)
    grid = default_grid(TRIG, tg, 0.0, 301, 8.0)
    c_fit = 0.9
    worst = 0.0
    for jp in (1, 3, 6, 10):
        span = tg.times[jp] - tg.times[0]
        for xp in np.linspace(-2, 2, 9):
            h = defect_kernel(TRIG, tg, 0, jp, 0.0, float(xp), grid)
            ref = gauss(xp, 0.0, span / c_fit) * math.sqrt(c_fit) / math.sqrt(1.0)
            worst = max(worst, abs(h) * span ** (1 - 0.5) / ref)
    assert math.isfinite(worst)
    assert worst < 50.0


def test_envelope_exact_gaussian_case():
    tg = SchemeGrid(T=1.0, N=6)
    grid = default_grid(CONST, tg, 0.0, 501, 9.0)
    table = chapman_kolmogorov_density(CONST, tg, 0, 6, 0.0, grid)
    rep = envelope_check(table, GaussParams(1.0, 1.0), 1.0, 0.0)
    assert rep.sup_ratio == pytest.approx(1.0, abs=1e-6)
    assert rep.inf_ratio == pytest.approx(1.0, abs=1e-6)
    assert rep.holds


def test_envelope_perturbed_model():
    tg = SchemeGrid(T=1.0, N=10)
    grid = default_grid(TRIG, tg, 0.0, 501, 9.0)
    table = chapman_kolmogorov_density(TRIG, tg, 0, 10, 0.0, grid)
    rep = envelope_check(table, GaussParams(0.5, 5.0), 1.0, 0.0)
    assert rep.holds
    # a domination constant below the measured ratio must trip the detector
    tight = envelope_check(table, GaussParams(0.5, rep.sup_ratio * 0.99), 1.0, 0.0)
    assert not tight.holds


def test_term_decay_warning():
    import warnings as w

    from eulermc.errors import DivergenceWarning
    from eulermc.parametrix import check_term_decay

    with w.catch_warnings(record=True) as caught:
        w.simplefilter("always")
        check_term_decay([1.0, 0.5, 0.7, 0.1])
    assert any(issubclass(c.category, DivergenceWarning) for c in caught)
    with w.catch_warnings(record=True) as caught:
        w.simplefilter("always")
        check_term_decay([1.0, 0.5, 0.1, 0.01])
    assert not caught


def test_table_csv_exports(tmp_path):
    grid = Grid1D(0.0, 1.0, 3)
    vec = DensityTable(grid, 0, 2, np.array([0.1, 0.2, 0.3]))
    vec.to_csv(tmp_path / "vec.csv", config_hash="abc123")
    lines = (tmp_path / "vec.csv").read_text().splitlines()
    assert lines[0] == "# config-hash: abc123"
    assert lines[1] == "x_prime,value"
    assert len(lines) == 5
    mat = DensityTable(grid, 0, 2, np.arange(9.0).reshape(3, 3))
    mat.to_csv(tmp_path / "mat.csv")
    lines = (tmp_path / "mat.csv").read_text().splitlines()
    assert lines[0] == "x,x_prime,value"
    assert len(lines) == 1 + 9
    assert lines[1].split(",")[2] == "0"


def test_signed_tables_refuse_normalization_checks():
    grid = Grid1D(-1, 1, 11)
    table = DensityTable(grid, 0, 1, np.ones(11), signed=True)
    with pytest.raises(ArgumentError):
        envelope_check(table, GaussParams(1.0, 1.0), 1.0, 0.0)
    with pytest.raises(ArgumentError):
        DensityTable(grid, 0, 1, np.ones((11, 11))).mass()
