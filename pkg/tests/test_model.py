import numpy as np
import pytest

from conftest import smooth_field
from nlch.errors import ValidationError
from nlch.grid import build_grid, build_kernel, convolve, laplacian
from nlch.model import (ModelParams, ModelState, Source, Variant, b_eps, chemical_potential,
                        flux_divergence, pressure, rhs, source_term)


def face_loop_divergence(u, mu, h):
    """1-d oracle: explicit face loop with the donor-cell rule."""
    n = len(u)
    flux = np.empty(n)
    for i in range(n):
        j = (i + 1) % n
        m = u[j] if mu[j] > mu[i] else u[i]
        flux[i] = m * (mu[j] - mu[i]) / h
    return np.array([(flux[i] - flux[i - 1]) / h for i in range(n)])


class TestParams:
    def test_invalid(self):
        with pytest.raises(ValidationError):
            ModelParams(gamma=0.5, p_h=0.7, eps=0.1)
        with pytest.raises(ValidationError):
            ModelParams(gamma=2, p_h=0.0, eps=0.1)
        with pytest.raises(ValidationError):
            ModelParams(gamma=2, p_h=0.7, eps=-1)
        with pytest.raises(ValueError):
            ModelParams(gamma=2, p_h=0.7, eps=0.1, source="bogus")

    def test_homeostatic(self):
        assert ModelParams(10, 0.7, 0.1).homeostatic_density == pytest.approx(0.7 ** 0.1)

    def test_state_rejects_negative(self):
        with pytest.raises(ValidationError, match="cell 2"):
            ModelState(np.array([0.1, 0.2, -0.1]))


class TestPressure:
    def test_values(self, growth):
        assert np.all(pressure(np.zeros(8), growth) == 0)
        assert np.all(pressure(np.ones(8), growth) == 1)
        assert np.all(pressure(np.full(8, 0.5), growth) == 0.0009765625)

    def test_negative_names_cell(self, growth):
        u = np.full(8, 0.5)
        u[5] = -1e-3
        with pytest.raises(ValidationError, match="cell 5"):
            pressure(u, growth)


class TestBeps:
    def test_constant(self, kernel2):
        assert np.all(b_eps(kernel2.grid.full(0.4), kernel2) == 0)

    def test_cosine(self, kernel1):
        x = kernel1.grid.coords()[0]
        u = np.cos(2 * np.pi * x)
        m = kernel1.fourier_multiplier(1)
        np.testing.assert_allclose(b_eps(u, kernel1), (1 - m) / kernel1.eps ** 2 * u, atol=1e-12)

    @pytest.mark.parametrize("k", ["kernel1", "kernel2"])
    def test_dirichlet_form(self, k, request, rng):
        kernel = request.getfixturevalue(k)
        g = kernel.grid
        u = rng.random(g.shape)
        lhs = 2 * kernel.eps ** 2 * g.cell_volume * np.sum(u * b_eps(u, kernel))
        axes = tuple(range(g.dim))
        rhs_ = g.cell_volume * sum(w * np.sum((u - np.roll(u, tuple(y), axis=axes)) ** 2)
                                   for y, w in zip(kernel.offsets, kernel.weights))
        assert lhs == pytest.approx(rhs_, rel=1e-12)
        assert lhs > 0

    def test_local_limit_trend(self):
        # B_eps u + C Lap u shrinks as eps -> 0 at fixed eps/h
        errs = []
        for n in (64, 128, 256):
            g = build_grid(1, n, 1.0)
            k = build_kernel(g, 8 * g.h)
            x = g.coords()[0]
            u = np.sin(2 * np.pi * x) + 0.3 * np.cos(6 * np.pi * x)
            c = k.second_moment_coeff()
            errs.append(np.abs(b_eps(u, k) + c * laplacian(g, u)).max())
        assert errs[0] > errs[1] > errs[2]


class TestChemicalPotential:
    def test_constant(self, kernel1, growth):
        u = kernel1.grid.full(0.8)
        np.testing.assert_array_equal(chemical_potential(u, growth, kernel1), 0.8 ** 10)
        loc = ModelParams(10, 0.7, 0.125, variant=Variant.LOCAL)
        np.testing.assert_array_equal(chemical_potential(u, loc, kernel1), 0.8 ** 10)

    def test_linearization(self, kernel1, growth):
        x = kernel1.grid.coords()[0]
        c, a = 0.6, 1e-5
        phi = np.cos(2 * np.pi * x)
        mu = chemical_potential(c + a * phi, growth, kernel1)
        m = kernel1.fourier_multiplier(1)
        lin = c ** 10 + (10 * c ** 9 + (1 - m) / kernel1.eps ** 2) * a * phi
        assert np.abs(mu - lin).max() < 50 * a * a

    def test_eps_mismatch(self, kernel1):
        with pytest.raises(ValidationError, match="eps"):
            chemical_potential(kernel1.grid.full(0.5), ModelParams(10, 0.7, 0.2), kernel1)


class TestFluxDivergence:
    def test_constant_mu(self, grid1, rng):
        assert np.all(flux_divergence(rng.random(64), grid1.full(2.0), grid1) == 0)

    def test_face_loop_oracle(self, grid1, rng):
        u, mu = rng.random((2, 64))
        np.testing.assert_allclose(flux_divergence(u, mu, grid1),
                                   face_loop_divergence(u, mu, grid1.h), rtol=1e-12, atol=1e-9)

    def test_constant_u_laplacian(self, grid2, rng):
        mu = rng.random(grid2.shape)
        out = flux_divergence(grid2.full(0.3), mu, grid2)
        np.testing.assert_allclose(out, 0.3 * laplacian(grid2, mu), rtol=1e-12, atol=1e-9)

    def test_conservative(self, grid2, rng):
        u, mu = rng.random((2,) + grid2.shape)
        d = flux_divergence(u, mu, grid2)
        assert abs(d.sum()) <= 1e-12 * np.abs(d).sum()

    def test_empty_cell_donor(self, grid1):
        u = grid1.full(0.5)
        u[10] = 0.0
        mu = grid1.zeros()
        mu[9] = mu[11] = 1.0  # neighbours at higher potential push mass in
        d = flux_divergence(u, mu, grid1)
        h2 = grid1.h ** 2
        # inflow from both neighbours, donor-limited by their density 0.5
        assert d[10] == pytest.approx(2 * 0.5 / h2)
        # empty cell as a donor: raise its potential, nothing leaves
        mu = grid1.zeros()
        mu[10] = 1.0
        d = flux_divergence(u, mu, grid1)
        assert d[10] == 0.0
        assert d[9] == 0.0 and d[11] == 0.0

    def test_negative_mobility(self, grid1):
        u = grid1.full(0.5)
        u[3] = -0.1
        with pytest.raises(ValidationError):
            flux_divergence(u, grid1.zeros(), grid1)


class TestSourceAndRhs:
    def test_source_values(self, growth, nosource):
        assert source_term(np.full(4, 0.5), growth)[0] == 0.34951171875
        c = growth.homeostatic_density
        np.testing.assert_allclose(source_term(np.full(4, c), growth), 0, atol=1e-15)
        assert np.all(source_term(np.zeros(4), growth) == 0)
        assert np.all(source_term(np.full(4, 0.5), nosource) == 0)

    def test_uniform_reduction(self, kernel2, growth):
        for c in (0.2, 0.5, 1.1):
            r = rhs(ModelState(kernel2.grid.full(c)), growth, kernel2)
            assert np.all(r == c * (0.7 - c ** 10))

    def test_stationary(self, kernel1, growth, nosource):
        c = growth.homeostatic_density
        np.testing.assert_allclose(rhs(kernel1.grid.full(c), growth, kernel1), 0, atol=1e-15)
        assert np.all(rhs(kernel1.grid.full(0.3), nosource, kernel1) == 0)

    @pytest.mark.parametrize("k", ["kernel1", "kernel2"])
    def test_mass_neutral_without_source(self, k, request, nosource):
        kernel = request.getfixturevalue(k)
        r = rhs(smooth_field(kernel.grid, 3), nosource, kernel)
        assert abs(r.sum()) <= 1e-12 * np.abs(r).sum()
