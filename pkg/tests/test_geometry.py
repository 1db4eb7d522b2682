import numpy as np
import pytest

from faradaylab import SurfaceField, VolumeField, make_grid
from faradaylab.errors import FlatteningDegenerate
from faradaylab.geometry import build_geometry, check_piola, div_A, mean_curvature
from faradaylab.grid import poisson_extend


def _eta(g, eps=0.05):
    S1, S2 = g.surface_mesh()
    return SurfaceField.from_values(g, eps * np.cos(2 * np.pi * S1) + 0.5 * eps * np.sin(2 * np.pi * (S1 + S2)))


def test_flat_surface_gives_identity(small_grid):
    geom = build_geometry(SurfaceField.zeros(small_grid), None, small_grid)
    assert np.allclose(geom.A, np.eye(3)[:, :, None, None, None])
    assert np.all(geom.J == 1.0) and np.all(geom.K == 1.0)
    assert np.all(geom.A_minus_I == 0.0)


def test_matrices_match_inverse_transpose_of_the_map_gradient():
    g = make_grid(None, 16, 16, 17)
    eta = _eta(g)
    geom = build_geometry(eta, None, g)
    _, _, X3 = g.mesh()
    phi3 = X3 + poisson_extend(eta, g).scalar * (1 + X3 / g.b)
    grad = np.zeros((3, 3) + phi3.shape)
    grad[0, 0] = grad[1, 1] = 1.0
    grad[2] = g.grad(phi3)
    inv_t = np.linalg.inv(np.moveaxis(grad, (0, 1), (-2, -1))).swapaxes(-1, -2)
    assert np.allclose(np.moveaxis(geom.A, (0, 1), (-2, -1)), inv_t, atol=1e-11)
    assert np.allclose(geom.J, grad[2, 2], atol=1e-11)
    assert np.max(np.abs(geom.K * geom.J - 1.0)) < 1e-14


def test_normal_is_unnormalised_graph_normal(small_grid):
    g = small_grid
    S1, _ = g.surface_mesh()
    eta = SurfaceField.from_values(g, 0.02 * np.sin(2 * np.pi * S1))
    geom = build_geometry(eta, None, g)
    assert np.allclose(geom.N[0], -0.04 * np.pi * np.cos(2 * np.pi * S1), atol=1e-14)
    assert np.all(geom.N[1] == 0.0) and np.all(geom.N[2] == 1.0)


def test_piola_identity_converges_under_refinement():
    levels = [8, 16, 32]
    res = []
    for n in levels:
        g = make_grid(None, n, n, 33)
        S1, _ = g.surface_mesh()
        res.append(check_piola(build_geometry(SurfaceField.from_values(g, 0.05 * np.cos(2 * np.pi * S1)), None, g)))
    assert res[-1] <= 1e-8
    for a, b in zip(res, res[1:]):
        if a > 1e-10:
            assert b <= a / 10


def test_volume_is_preserved(small_grid):
    geom = build_geometry(_eta(small_grid), None, small_grid)
    assert abs(small_grid.integrate_volume(geom.J - 1.0)) < 1e-14


def test_twisted_divergence_is_physical_divergence():
    # a field divergence free in Eulerian variables stays so after pull-back
    g = make_grid(None, 16, 16, 25)
    eta = _eta(g, 0.03)
    geom = build_geometry(eta, None, g)
    X1, X2, X3 = g.mesh()
    y3 = X3 + poisson_extend(eta, g).scalar * (1 + X3 / g.b)
    k = 2 * np.pi
    v = np.stack([np.cos(k * X1) * np.cosh(y3), np.zeros_like(X1), k * np.sin(k * X1) * np.sinh(y3) / 1.0])
    # div v = -k sin cosh + k sin cosh = 0 requires d3 v3 = k sin cosh
    d = div_A(VolumeField.from_values(g, v), geom).scalar
    assert np.max(np.abs(d)) < 1e-8


def test_mean_curvature_of_a_cosine():
    g = make_grid(None, 32, 8, 5)
    S1, _ = g.surface_mesh()
    eps, k = 0.1, 2 * np.pi
    eta = SurfaceField.from_values(g, eps * np.cos(k * S1))
    split = mean_curvature(eta, g, dealias=False)
    slope = -eps * k * np.sin(k * S1)
    exact = -eps * k**2 * np.cos(k * S1) / (1 + slope**2) ** 1.5
    assert np.max(np.abs(split.H.scalar - exact)) < 1e-6
    assert np.allclose(split.laplacian.scalar + split.difference.scalar, split.H.scalar, atol=1e-14)


def test_degenerate_flattening_raises(small_grid):
    S1, _ = small_grid.surface_mesh()
    eta = SurfaceField.from_values(small_grid, 0.9 * np.cos(2 * np.pi * S1))
    with pytest.raises(FlatteningDegenerate) as exc:
        build_geometry(eta, None, small_grid)
    assert exc.value.min_jacobian < 0.1
    assert "flattening degenerate" in str(exc.value)
