import numpy as np
import pytest

from faradaylab import FlowState, Params, SurfaceField, VolumeField, make_grid
from faradaylab.forcing import compute_F21, compute_G, kinematic_dt_eta
from faradaylab.geometry import build_geometry

P = Params(amp=0.3, omega=2.0)


@pytest.fixture(scope="module")
def grid():
    return make_grid(P, 16, 16, 17)


def _fields(g, eps=1.0):
    X1, X2, X3 = g.mesh()
    k = 2 * np.pi
    u = 0.1 * eps * np.stack([
        np.sin(k * X1) * (X3 + 1) ** 2,
        np.cos(k * X2) * (X3 + 1),
        np.sin(k * (X1 + X2)) * (X3 + 1) ** 2 * X3,
    ])
    p = eps * np.cos(k * X1) * X3
    S1, S2 = g.surface_mesh()
    eta = eps * (0.01 * np.cos(k * S1) + 0.005 * np.sin(k * (S1 + 2 * S2)))
    return u, p, eta


def _state(g, u, p, eta, t=0.3):
    return FlowState(VolumeField.from_values(g, u), VolumeField.from_values(g, p), SurfaceField.from_values(g, eta), t)


def test_flat_surface_leaves_only_advection(grid):
    g = grid
    u, p, _ = _fields(g)  # u3 vanishes on top, so the kinematic dt eta is zero
    F = compute_G(_state(g, u, p, np.zeros((g.n1, g.n2))), params=P)
    conv = np.stack([sum(u[j] * g.grad(u[i])[j] for j in range(3)) for i in range(3)])
    assert np.max(np.abs(F.G1.values + g.dealias(conv))) < 1e-13
    for G in (F.G2, F.G3, F.G4, F.G5):
        assert np.max(np.abs(G.values)) == 0.0


def test_G2_is_divergence_defect(grid):
    g = grid
    u, p, eta = _fields(g)
    s = _state(g, u, p, eta)
    geom = build_geometry(s.eta, None, g)
    divu = sum(g.grad(u[i])[i] for i in range(3))
    assert np.max(np.abs(compute_G(s, params=P).G2.scalar - (divu - geom.div_A(u)))) < 1e-13


def test_G3_closed_form(grid):
    g = grid
    S1, _ = g.surface_mesh()
    u = np.zeros((3, g.nz, g.n1, g.n2))
    u[0] = 1.0
    s = _state(g, u, np.zeros_like(u[0]), 0.01 * np.sin(2 * np.pi * S1), 0.0)
    G3 = compute_G(s, params=P).G3.scalar
    assert np.allclose(G3, -2 * np.pi * 0.01 * np.cos(2 * np.pi * S1), atol=1e-15)


def test_G5_is_modulated_gravity(grid):
    g = grid
    u, p, eta = _fields(g)
    s = _state(g, u, p, eta, 0.17)
    assert np.allclose(compute_G(s, params=P).G5.scalar, P.forcing_coefficient(0.17) * s.eta.scalar, atol=1e-15)


def test_nonlinear_terms_are_quadratic(grid):
    g = grid
    eps = 1e-4
    a = compute_G(_state(g, *_fields(g, eps)), params=P)
    b = compute_G(_state(g, *_fields(g, 2 * eps)), params=P)
    for name in ("G1", "G2", "G3", "G4"):
        ra = np.max(np.abs(getattr(a, name).values))
        rb = np.max(np.abs(getattr(b, name).values))
        assert rb / ra == pytest.approx(4.0, rel=2e-3), name


def test_kinematic_dt_eta(grid):
    g = grid
    u, _, eta = _fields(g)
    e = SurfaceField.from_values(g, eta)
    top = u[:, -1]
    expect = top[2] - top[0] * g.d1(eta) - top[1] * g.d2(eta)
    assert np.allclose(kinematic_dt_eta(u, e).scalar, g.dealias(expect), atol=1e-14)


def test_F21_matches_finite_difference_of_A(grid):
    g = grid
    u, p, eta = _fields(g)
    S1, _ = g.surface_mesh()
    deta = 0.02 * np.sin(2 * np.pi * S1)
    s = _state(g, u, p, eta)
    geom = build_geometry(s.eta, SurfaceField.from_values(g, deta), g)
    F21 = compute_F21(s, geom).scalar
    h = 1e-5
    Ap = build_geometry(SurfaceField.from_values(g, eta + h * deta), None, g).A
    Am = build_geometry(SurfaceField.from_values(g, eta - h * deta), None, g).A
    grads = np.stack([g.grad(u[i]) for i in range(3)])
    fd = g.dealias(np.einsum("jk...,jk...->...", (Ap - Am) / (2 * h), grads))
    assert np.max(np.abs(F21 - fd)) < 1e-8 * max(1.0, np.max(np.abs(fd)))
