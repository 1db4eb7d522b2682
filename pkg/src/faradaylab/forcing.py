"""Nonlinear forcing terms of the flattened constant-coefficient system.

Moving every geometry-dependent piece of the flattened equations to the
right-hand side leaves a Stokes problem with constant coefficients,

    dt u + div S(u, p) = G1,    div u = G2,    dt eta = u3 + G3,
    S(u, p) e3 = (g eta - sigma Lap eta) e3 + G4 + G5 e3   on x3 = 0,

with ``S(u, p) = p I - mu D u``.  ``G5 = A omega^2 f''(omega t) eta`` is the
only linear term and is kept apart so that callers may treat it as they like.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GeometryState, build_geometry, mean_curvature
from .grid import Grid, SurfaceField, VolumeField


@dataclass(frozen=True, eq=False)
class ForcingBundle:
    G1: VolumeField
    G2: VolumeField
    G3: SurfaceField
    G4: SurfaceField
    G5: SurfaceField
    F21: VolumeField | None = None


def kinematic_dt_eta(u_nodal, eta: SurfaceField) -> SurfaceField:
    """``dt eta = u . N`` on the surface, dealiased."""
    g = eta.grid
    e = eta.coef[0]
    d1 = g.ifft(g._dk1 * e)
    d2 = g.ifft(g._dk2 * e)
    top = u_nodal[:, -1]
    val = g.dealias(top[2] - top[0] * d1 - top[1] * d2)
    return SurfaceField.from_values(g, val)


def _div_flat(grid: Grid, T):
    """``(div T)_i = d_j T_ij``."""
    return np.stack([grid.d1(T[i, 0]) + grid.d2(T[i, 1]) + grid.d3(T[i, 2]) for i in range(3)])


def forcing_arrays(u, p, eta: SurfaceField, t, params, geom: GeometryState | None = None):
    """Nodal ``(G1, G2, G3, G4, G5)`` from nodal ``u (3, nz, n1, n2)``, ``p``.

    ``geom`` must carry ``dt_eta``; when omitted it is built here from the
    kinematic identity.
    """
    g = eta.grid
    mu, sigma = params.mu, params.sigma
    if geom is None:
        geom = build_geometry(eta, kinematic_dt_eta(u, eta), g)
    deal = g.dealias
    AmI = geom.A_minus_I

    Gc = np.stack([g.grad(u[i]) for i in range(3)])  # Gc[i, k] = d_k u_i
    # dt eta_hat btilde K d3 u
    T1 = deal(geom.dt_eta_hat_values * g.btilde * geom.K * Gc[:, 2])
    # u . grad_A u
    GA = geom.grad_tensor_A(u)
    conv = deal(np.einsum("j...,ij...->i...", u, GA))
    # mu div D_{I-A} u
    visc = mu * _div_flat(g, geom.sym_grad_A(u, -AmI))
    # div_{A-I} S_A(u, p)
    SA = geom.stress_A(u, p, mu)
    T4 = geom.div_A_tensor(SA, AmI)
    G1 = T1 - conv - visc - T4

    G2 = -geom.div_A(u, AmI)

    e = eta.coef[0]
    d1 = g.ifft(g._dk1 * e)
    d2 = g.ifft(g._dk2 * e)
    top = u[:, -1]
    G3 = deal(-(top[0] * d1 + top[1] * d2))

    eta_n = g.ifft(e)
    G5 = params.forcing_coefficient(t) * eta_n

    curv = mean_curvature(eta, g)
    H = curv.H.scalar
    d = np.stack([d1, d2, np.zeros_like(d1)])  # e3 - N
    N = geom.N
    Du = np.stack([[Gc[i, j, -1] + Gc[j, i, -1] for j in range(3)] for i in range(3)])
    S_top = -mu * Du
    for i in range(3):
        S_top[i, i] += p[-1]
    DAmI_top = geom.sym_grad_A(u, AmI)[:, :, -1]
    c_rest = params.g * eta_n + G5
    G4 = deal(
        np.einsum("ij...,j...->i...", S_top, d)
        + mu * np.einsum("ij...,j...->i...", DAmI_top, N)
        + sigma * H * d
        - c_rest * d
    )
    G4[2] -= sigma * curv.difference.scalar
    return G1, G2, G3, G4, G5


def compute_G(state, geom: GeometryState | None = None, t=None, params=None) -> ForcingBundle:
    """Evaluate ``G1 .. G5`` (and ``F21`` when ``geom`` carries ``dt_eta``)."""
    if params is None:
        raise ValueError("params is required")
    t = state.t if t is None else t
    g = state.grid
    u = state.u.values
    p = state.p.scalar
    if geom is None:
        geom = build_geometry(state.eta, kinematic_dt_eta(u, state.eta), g)
    elif geom.dt_eta is None:
        geom = build_geometry(state.eta, kinematic_dt_eta(u, state.eta), g, jacobian_floor=-np.inf, dealias=geom.dealias)
    G1, G2, G3, G4, G5 = forcing_arrays(u, p, state.eta, t, params, geom)
    F21 = compute_F21(state, geom)
    return ForcingBundle(
        VolumeField.from_values(g, G1),
        VolumeField.from_values(g, G2),
        SurfaceField.from_values(g, G3),
        SurfaceField.from_values(g, G4),
        SurfaceField.from_values(g, G5),
        F21,
    )


def compute_F21(state, geom: GeometryState, dt_geom_estimate=None) -> VolumeField:
    """``F^{2,1} = dt calA_jk d_k u_j`` (dealiased).

    ``dt_geom_estimate`` may be a geometry built with a different estimate of
    ``dt eta`` (for instance a centred difference); it defaults to ``geom``.
    """
    src = geom if dt_geom_estimate is None else dt_geom_estimate
    g = state.grid
    if src.dA is None:
        return VolumeField.zeros(g, 1)
    u = state.u.values
    Gc = np.stack([g.grad(u[i]) for i in range(3)])
    val = g.dealias(np.einsum("jk...,jk...->...", src.dA, Gc))
    return VolumeField.from_values(g, val)
