import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faradaylab import ConfigurationError, SurfaceField, VolumeField, make_grid
from faradaylab.grid import chebyshev_lobatto, poisson_extend, sobolev_norm_surface, sobolev_norm_volume


def test_lobatto_nodes_ascending_and_top_last():
    z, D, w = chebyshev_lobatto(9, b=2.0)
    assert z[0] == pytest.approx(-2.0) and z[-1] == pytest.approx(0.0)
    assert np.all(np.diff(z) > 0)
    assert w.sum() == pytest.approx(2.0, rel=1e-14)


@pytest.mark.parametrize("deg", [0, 1, 3, 7])
def test_lobatto_differentiates_polynomials_exactly(deg):
    z, D, _ = chebyshev_lobatto(9, b=1.5)
    assert np.allclose(D @ z**deg, deg * z ** max(deg - 1, 0) * (deg > 0), atol=1e-11)


def test_clenshaw_curtis_integrates_polynomials():
    z, _, w = chebyshev_lobatto(11, b=1.0)
    for deg in range(10):
        exact = -((-1.0) ** (deg + 1)) / (deg + 1)
        assert w @ z**deg == pytest.approx(exact, abs=1e-13)


def test_horizontal_derivatives_of_a_mode(small_grid):
    g = small_grid
    X1, X2, X3 = g.mesh()
    f = np.sin(2 * np.pi * X1) * np.cos(4 * np.pi * X2) * (1 + X3) ** 2
    assert np.allclose(g.d1(f), 2 * np.pi * np.cos(2 * np.pi * X1) * np.cos(4 * np.pi * X2) * (1 + X3) ** 2, atol=1e-12)
    assert np.allclose(g.d2(f), -4 * np.pi * np.sin(2 * np.pi * X1) * np.sin(4 * np.pi * X2) * (1 + X3) ** 2, atol=1e-12)
    assert np.allclose(g.d3(f), 2 * np.sin(2 * np.pi * X1) * np.cos(4 * np.pi * X2) * (1 + X3), atol=1e-11)


def test_dealias_removes_the_upper_third():
    g = make_grid(None, 12, 12, 5)
    S1, _ = g.surface_mesh()
    high = np.cos(2 * np.pi * 5 * S1)
    low = np.cos(2 * np.pi * 3 * S1)
    assert np.max(np.abs(g.dealias(high))) < 1e-14
    assert np.allclose(g.dealias(low), low, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_fft_roundtrip(seed):
    g = make_grid(None, 8, 6, 5)
    a = np.random.default_rng(seed).standard_normal((g.nz, g.n1, g.n2))
    assert np.allclose(g.ifft(g.fft(a)), a, atol=1e-13)


def test_fields_copy_their_input(small_grid):
    a = np.zeros((1, small_grid.n1, small_grid.n2), complex)
    f = SurfaceField(small_grid, a)
    a[0, 1, 0] = 1.0
    assert f.coef[0, 1, 0] == 0.0
    with pytest.raises(ValueError):
        f.coef[0, 0, 0] = 1.0


def test_surface_sobolev_norm_of_a_mode(small_grid):
    g = small_grid
    S1, _ = g.surface_mesh()
    f = SurfaceField.from_values(g, 0.3 * np.cos(2 * np.pi * S1))
    k2 = (2 * np.pi) ** 2
    for s in (0.0, 0.5, 1.5, 2.5):
        assert sobolev_norm_surface(f, s) ** 2 == pytest.approx(0.045 * (1 + k2) ** s, rel=1e-12)


def test_volume_sobolev_norm_closed_form(small_grid):
    g = small_grid
    X1, _, X3 = g.mesh()
    # f = cos(2 pi x1) x3: |f|^2 + |d1 f|^2 + |d3 f|^2 integrated
    f = VolumeField.from_values(g, np.cos(2 * np.pi * X1) * X3)
    h1 = 0.5 * (1.0 / 3.0) * (1 + (2 * np.pi) ** 2) + 0.5
    assert sobolev_norm_volume(f, 1) ** 2 == pytest.approx(h1, rel=1e-12)


def test_poisson_extension_is_harmonic_with_correct_trace():
    g = make_grid(None, 8, 8, 33)
    S1, S2 = g.surface_mesh()
    f = SurfaceField.from_values(g, np.cos(2 * np.pi * S1) + 0.5 * np.sin(2 * np.pi * (S1 + S2)))
    ext = poisson_extend(f, g).scalar
    lap = g.d1(g.d1(ext)) + g.d2(g.d2(ext)) + g.d3(g.d3(ext))
    assert np.max(np.abs(lap)) < 1e-10 * np.max(np.abs(g.d3(g.d3(ext))))
    assert np.allclose(ext[-1], f.scalar, atol=1e-14)


@pytest.mark.parametrize("kw", [dict(n1=7, n2=8, nz=9), dict(n1=8, n2=8, nz=2)])
def test_make_grid_rejects_bad_sizes(kw):
    with pytest.raises(ConfigurationError):
        make_grid(None, **kw)
