"""Quantities derived from the surface elevation through the flattening map.

The map ``Phi(x, t) = (x', x3 + eta_hat (1 + x3/b))`` with ``eta_hat`` the
Poisson extension of ``eta`` takes the fixed slab onto the moving domain.
``a1, a2`` are the horizontal gradients of ``eta_hat`` weighted by
``1 + x3/b``, ``J`` the Jacobian determinant and ``K = 1/J``; the matrix

    calA = [[1, 0, -a1 K], [0, 1, -a2 K], [0, 0, K]]

twists every differential operator.  Products are formed on the nodes and
then truncated with the 2/3 rule.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import FlatteningDegenerate
from .grid import Grid, SurfaceField, VolumeField, poisson_extend

JACOBIAN_FLOOR = 0.1


@dataclass(frozen=True, eq=False)
class GeometryState:
    """Flattening data at one instant; nodal arrays have shape ``(nz, n1, n2)``."""

    grid: Grid
    eta: SurfaceField
    eta_hat: VolumeField
    a1: np.ndarray
    a2: np.ndarray
    J: np.ndarray
    K: np.ndarray
    N: np.ndarray  # (3, n1, n2)
    dt_eta: SurfaceField | None = None
    dt_eta_hat: VolumeField | None = None
    dealias: bool = True

    @cached_property
    def A(self):
        """``calA`` as a ``(3, 3, nz, n1, n2)`` array."""
        M = self.A_minus_I
        for i in range(3):
            M[i, i] = M[i, i] + 1.0
        return M

    @property
    def A_minus_I(self):
        """``calA - I`` assembled without cancellation (``K - 1 = -(J - 1) K``)."""
        z = np.zeros_like(self.K)
        return np.array(
            [
                [z, z, -self.a1 * self.K],
                [z, z, -self.a2 * self.K],
                [z, z, -(self.J - 1.0) * self.K],
            ]
        )

    @cached_property
    def dA(self):
        """``d calA / dt`` built from ``dt_eta``; ``None`` when not supplied."""
        if self.dt_eta_hat is None:
            return None
        g = self.grid
        eh_t = self.dt_eta_hat.coef[0]
        a1t = g.ifft(g._dk1 * eh_t) * g.btilde
        a2t = g.ifft(g._dk2 * eh_t) * g.btilde
        Jt = g.ifft(eh_t) / g.b + g.ifft(g.kmag * eh_t) * g.btilde
        Kt = -Jt * self.K**2
        z = np.zeros_like(self.K)
        return np.array(
            [
                [z, z, -(a1t * self.K + self.a1 * Kt)],
                [z, z, -(a2t * self.K + self.a2 * Kt)],
                [z, z, Kt],
            ]
        )

    @property
    def dt_eta_hat_values(self):
        if self.dt_eta_hat is None:
            return np.zeros_like(self.K)
        return self.dt_eta_hat.scalar

    def field(self, name):
        """Any nodal attribute wrapped as a :class:`VolumeField`."""
        return VolumeField.from_values(self.grid, getattr(self, name))

    def _d(self, a):
        return self.grid.dealias(a) if self.dealias else a

    # twisted operators on nodal arrays ------------------------------------
    # Every operator accepts an optional matrix ``M`` (default calA) so that
    # the same code evaluates the ``I - calA`` and ``calA - I`` variants.
    def grad_A(self, f, M=None):
        """``(grad_M f)_i = M_ij d_j f`` for scalar nodal ``f``."""
        M = self.A if M is None else M
        return self._d(np.einsum("ij...,j...->i...", M, self.grid.grad(f)))

    def div_A(self, X, M=None):
        """``M_ij d_j X_i`` for vector nodal ``X`` (shape ``(3, ...)``)."""
        M = self.A if M is None else M
        Gc = np.stack([self.grid.grad(X[i]) for i in range(3)])
        return self._d(np.einsum("ij...,ij...->...", M, Gc))

    def grad_tensor_A(self, u, M=None):
        """``G[i, j] = M_jk d_k u_i``."""
        M = self.A if M is None else M
        Gc = np.stack([self.grid.grad(u[i]) for i in range(3)])
        return self._d(np.einsum("jk...,ik...->ij...", M, Gc))

    def sym_grad_A(self, u, M=None):
        """``(D_M u)_ij = M_ik d_k u_j + M_jk d_k u_i`` as ``(3, 3, ...)``."""
        G = self.grad_tensor_A(u, M)
        return G + np.swapaxes(G, 0, 1)

    def stress_A(self, u, p, mu):
        """``S_A(u, p) = p I - mu D_A u``."""
        S = -mu * self.sym_grad_A(u)
        for i in range(3):
            S[i, i] += p
        return S

    def div_A_tensor(self, T, M=None):
        """``(div_M T)_i = M_jk d_k T_ij``."""
        return np.stack([self.div_A(T[i], M) for i in range(3)])


def _derived(grid, eta_coef):
    eh = poisson_extend(SurfaceField(grid, eta_coef), grid)
    c = eh.coef[0]
    bt = grid.btilde
    a1 = grid.ifft(grid._dk1 * c) * bt
    a2 = grid.ifft(grid._dk2 * c) * bt
    J = 1.0 + grid.ifft(c) / grid.b + grid.ifft(grid.kmag * c) * bt
    return eh, a1, a2, J


def build_geometry(
    eta: SurfaceField,
    deta_dt: SurfaceField | None = None,
    grid: Grid | None = None,
    params=None,
    jacobian_floor=JACOBIAN_FLOOR,
    dealias=True,
) -> GeometryState:
    """Flattening geometry for surface ``eta`` (and ``dt eta`` if given).

    Raises :class:`FlatteningDegenerate` when ``min J <= jacobian_floor``.
    """
    grid = eta.grid if grid is None else grid
    eh, a1, a2, J = _derived(grid, eta.coef[0])
    jmin = float(np.min(J))
    if not jmin > jacobian_floor:
        raise FlatteningDegenerate(jmin, jacobian_floor)
    K = 1.0 / J
    e = eta.coef[0]
    N = np.stack([-grid.ifft(grid._dk1 * e), -grid.ifft(grid._dk2 * e), np.ones((grid.n1, grid.n2))])
    dt_eta_hat = None
    if deta_dt is not None:
        dt_eta_hat = poisson_extend(deta_dt, grid)
    return GeometryState(grid, eta, eh, a1, a2, J, K, N, deta_dt, dt_eta_hat, dealias)


def grad_A(f: VolumeField, geom: GeometryState) -> VolumeField:
    return VolumeField.from_values(geom.grid, geom.grad_A(f.scalar))


def div_A(X: VolumeField, geom: GeometryState) -> VolumeField:
    return VolumeField.from_values(geom.grid, geom.div_A(X.values))


_SYM = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


def sym_grad_A(u: VolumeField, geom: GeometryState) -> VolumeField:
    """Six components ordered ``11, 22, 33, 12, 13, 23``."""
    T = geom.sym_grad_A(u.values)
    return VolumeField.from_values(geom.grid, np.stack([T[i, j] for i, j in _SYM]))


def stress_A(u: VolumeField, p: VolumeField, geom: GeometryState, mu) -> VolumeField:
    T = geom.stress_A(u.values, p.scalar, mu)
    return VolumeField.from_values(geom.grid, np.stack([T[i, j] for i, j in _SYM]))


def check_piola(geom: GeometryState) -> float:
    """``max_i || d_k (J A_ik) ||_inf``; vanishes in the continuum."""
    g = geom.grid
    JA = geom.J[None, None] * geom.A
    res = 0.0
    for i in range(3):
        r = g.d1(JA[i, 0]) + g.d2(JA[i, 1]) + g.d3(JA[i, 2])
        res = max(res, float(np.max(np.abs(r))))
    return res


class CurvatureSplit(NamedTuple):
    """``H(eta) = div(grad eta / sqrt(1 + |grad eta|^2))`` and its pieces."""

    H: SurfaceField
    laplacian: SurfaceField
    difference: SurfaceField  # H - laplacian, computed without cancellation


def mean_curvature(eta: SurfaceField, grid: Grid | None = None, dealias=True) -> CurvatureSplit:
    grid = eta.grid if grid is None else grid
    e = eta.coef[0]
    g1 = grid.ifft(grid._dk1 * e)
    g2 = grid.ifft(grid._dk2 * e)
    s = g1 * g1 + g2 * g2
    root = np.sqrt(1.0 + s)
    # 1/sqrt(1+s) - 1 written to avoid cancellation for small slopes
    w = -s / (root * (1.0 + root))
    diff = grid.d1(w * g1) + grid.d2(w * g2)
    if dealias:
        diff = grid.dealias(diff)
    lap = grid.ifft(-(grid.kmag**2) * e)
    lap_f = SurfaceField.from_values(grid, lap)
    diff_f = SurfaceField.from_values(grid, diff)
    return CurvatureSplit(lap_f + diff_f, lap_f, diff_f)
