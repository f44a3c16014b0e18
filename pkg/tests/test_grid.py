import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlch.errors import ValidationError
from nlch.grid import (Profile, build_grid, build_kernel, convolve, forward_diff, grad,
                       laplacian)


def direct_convolve(kernel, u):
    """Independent oracle: explicit modular index loop."""
    g = kernel.grid
    out = np.zeros_like(u)
    if g.dim == 1:
        n = g.n
        for i in range(n):
            out[i] = sum(w * u[(i - y[0]) % n] for y, w in zip(kernel.offsets, kernel.weights))
    else:
        n = g.n
        for i in range(n):
            for j in range(n):
                out[i, j] = sum(w * u[(i - y[0]) % n, (j - y[1]) % n]
                                for y, w in zip(kernel.offsets, kernel.weights))
    return out


class TestBuildGrid:
    def test_spacing(self):
        assert build_grid(1, 256, 1.0).h == 1.0 / 256

    def test_cell_count_2d(self):
        g = build_grid(2, 128, 1.0)
        assert g.n_cells == 16384
        assert g.shape == (128, 128)

    @pytest.mark.parametrize("dim,n,L", [(1, 7, 1.0), (1, 6, 1.0), (1, 9, 1.0), (3, 16, 1.0),
                                         (1, 16, 0.0), (1, 16, -1.0)])
    def test_rejects(self, dim, n, L):
        with pytest.raises(ValidationError):
            build_grid(dim, n, L)

    def test_volume(self):
        g = build_grid(2, 16, 2.0)
        assert g.volume == 4.0
        assert g.cell_volume == pytest.approx(g.h ** 2)


class TestBuildKernel:
    def test_offset_count(self):
        # cells with |y h| < eps for n=64, eps=0.125: |y| <= 7
        k = build_kernel(build_grid(1, 64, 1.0), 0.125)
        assert len(k) == 15
        assert sorted(k.offsets[:, 0]) == list(range(-7, 8))

    @pytest.mark.parametrize("profile", list(Profile))
    @pytest.mark.parametrize("dim", [1, 2])
    def test_unit_mass_and_symmetry(self, profile, dim):
        g = build_grid(dim, 32, 1.0)
        k = build_kernel(g, 0.15, profile)
        assert k.weights.sum() == pytest.approx(1.0, abs=1e-15)
        d = k.as_dict()
        for y, w in d.items():
            assert d[tuple(-v for v in y)] == w
        assert np.all(k.weights > 0)

    def test_support(self):
        g = build_grid(2, 32, 1.0)
        k = build_kernel(g, 0.15)
        assert np.all(np.linalg.norm(k.offsets * g.h, axis=1) < 0.15)

    def test_bounds(self):
        g = build_grid(1, 64, 1.0)
        with pytest.raises(ValidationError, match="4h"):
            build_kernel(g, 0.05)
        with pytest.raises(ValidationError, match="L/4"):
            build_kernel(g, 0.3)
        build_kernel(g, 4 * g.h)
        build_kernel(g, 0.25)

    def test_profiles(self):
        assert Profile.POLYBUMP(np.array([0.0, 0.5, 1.0])).tolist() == [1.0, 0.421875, 0.0]
        assert Profile.WENDLAND(np.array([0.0, 0.5])).tolist() == [1.0, 0.1875]


class TestConvolve:
    def test_constant(self, kernel1, kernel2):
        for k in (kernel1, kernel2):
            u = k.grid.full(0.37)
            np.testing.assert_allclose(convolve(k, u), 0.37, rtol=1e-15)

    def test_cosine_multiplier(self, kernel1):
        g = kernel1.grid
        x = g.coords()[0]
        u = np.cos(2 * np.pi * x)
        m = sum(w * np.cos(2 * np.pi * y[0] * g.h) for y, w in zip(kernel1.offsets, kernel1.weights))
        assert kernel1.fourier_multiplier(1) == pytest.approx(m, rel=1e-14)
        np.testing.assert_allclose(convolve(kernel1, u), m * u, atol=1e-14)

    def test_indicator(self, kernel1):
        g = kernel1.grid
        u = g.zeros()
        u[0] = 1.0
        out = convolve(kernel1, u)
        for y, w in kernel1.as_dict().items():
            assert out[y[0] % g.n] == pytest.approx(w, rel=1e-14)

    def test_matches_direct(self, kernel1, kernel2, rng):
        for k in (kernel1, kernel2):
            u = rng.random(k.grid.shape)
            ref = direct_convolve(k, u)
            np.testing.assert_allclose(convolve(k, u), ref, rtol=1e-12, atol=0)

    def test_shape_mismatch(self, kernel1):
        with pytest.raises(ValidationError):
            convolve(kernel1, np.ones(32))

    def test_translation_and_adjoint(self, kernel2, rng):
        u, v = rng.random((2,) + kernel2.grid.shape)
        shifted = convolve(kernel2, np.roll(u, (3, -5), axis=(0, 1)))
        np.testing.assert_allclose(shifted, np.roll(convolve(kernel2, u), (3, -5), axis=(0, 1)),
                                   rtol=1e-12)
        lhs = np.sum(convolve(kernel2, u) * v)
        rhs = np.sum(u * convolve(kernel2, v))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 31), st.floats(-3, 3), st.floats(-3, 3))
    def test_linear(self, seed, a, b):
        g = build_grid(1, 32, 1.0)
        k = build_kernel(g, 0.2)
        r = np.random.default_rng(seed)
        u, v = r.random((2, 32))
        np.testing.assert_allclose(convolve(k, a * u + b * v),
                                   a * convolve(k, u) + b * convolve(k, v), atol=1e-12)


class TestDifferentialOperators:
    def test_grad_constant(self, grid2):
        for g in grad(grid2, grid2.full(2.0)):
            assert np.all(g == 0)

    def test_grad_sine(self, grid1):
        x = grid1.coords()[0]
        h = grid1.h
        (g,) = grad(grid1, np.sin(2 * np.pi * x))
        np.testing.assert_allclose(g, np.sin(2 * np.pi * h) / h * np.cos(2 * np.pi * x), atol=1e-12)

    def test_grad_second_order(self):
        errs = []
        for n in (32, 64, 128):
            g = build_grid(1, n, 1.0)
            x = g.coords()[0]
            (d,) = grad(g, np.exp(np.sin(2 * np.pi * x)))
            exact = 2 * np.pi * np.cos(2 * np.pi * x) * np.exp(np.sin(2 * np.pi * x))
            errs.append(np.abs(d - exact).max())
        assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
        assert errs[1] / errs[2] == pytest.approx(4, rel=0.02)

    def test_laplacian_eigen(self, grid1):
        x = grid1.coords()[0]
        h = grid1.h
        u = np.cos(2 * np.pi * x)
        lam = -(2 - 2 * np.cos(2 * np.pi * h)) / h ** 2
        np.testing.assert_allclose(laplacian(grid1, u), lam * u, atol=1e-9)

    def test_laplacian_constant_and_sum(self, grid2, rng):
        assert np.all(laplacian(grid2, grid2.full(3.0)) == 0)
        u = rng.random(grid2.shape)
        lap = laplacian(grid2, u)
        assert abs(lap.sum()) <= 1e-12 * np.abs(lap).sum()

    def test_summation_by_parts(self, grid2, rng):
        u, v = rng.random((2,) + grid2.shape)
        lhs = np.sum(laplacian(grid2, u) * v)
        rhs = -sum(np.sum(a * b) for a, b in zip(forward_diff(grid2, u), forward_diff(grid2, v)))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_2d_laplacian_matches_stencil(self, grid2, rng):
        u = rng.random(grid2.shape)
        ref = (np.roll(u, 1, 0) + np.roll(u, -1, 0) + np.roll(u, 1, 1) + np.roll(u, -1, 1)
               - 4 * u) / grid2.h ** 2
        np.testing.assert_allclose(laplacian(grid2, u), ref, rtol=1e-12)
