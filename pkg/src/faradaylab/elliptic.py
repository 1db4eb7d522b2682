"""Elliptic solvers on the slab, one vertical collocation problem per mode.

The Stokes systems are assembled per horizontal wavenumber as dense
``4 nz x 4 nz`` collocation matrices in the unknowns ``(u1, u2, u3, p)`` at
the vertical nodes.  Momentum rows at the two end nodes are replaced by
boundary rows; continuity is collocated at every node.  The zero mode has a
degenerate pressure/vertical-velocity block and is handled by a row
re-selection described in :func:`assemble`.

The generalised operator ``alpha u - mu Lap u + grad p`` with the surface
row ``p - 2 mu d3 u3 - beta u3`` is shared with the time stepper and the
Floquet analysis; ``alpha = beta = 0`` gives the plain Stokes problems.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError, ConfigurationError, SingularOperatorError, SolvabilityError
from .grid import Grid, SurfaceField, VolumeField

DIRICHLET = "dirichlet"
STRESS = "stress"
MIXED = "mixed"  # u3 and tangential stress on top
_VELOCITY_GAUGE = (DIRICHLET, MIXED)

_CHUNK = 64
COND_LIMIT = 1e14


def solve_capillary(f: SurfaceField, sigma: float, g: float) -> SurfaceField:
    """Solve ``-sigma Lap psi + g psi = f`` on the torus mode by mode."""
    if sigma < 0 or g < 0 or (sigma == 0 and g == 0):
        raise SingularOperatorError(f"capillary operator singular for sigma={sigma}, g={g}")
    grid = f.grid
    symbol = g + sigma * grid.kmag**2
    coef = np.zeros_like(f.coef)
    nz = symbol > 0
    coef[:, nz] = f.coef[:, nz] / symbol[nz]
    if not nz[0, 0] and np.any(np.abs(f.coef[:, 0, 0]) > 1e-14):
        raise SingularOperatorError("g = 0 requires mean-zero data")
    return SurfaceField(grid, coef)


@dataclass(frozen=True, eq=False)
class StokesData:
    """Right-hand sides: momentum ``f1``, divergence ``f2``, surface data ``f3``.

    ``f3`` is the velocity trace (Dirichlet variant) or the normal stress
    ``(pI - mu Du) e3`` (stress variant).
    """

    f1: VolumeField
    f2: VolumeField
    f3: SurfaceField

    def __post_init__(self):
        if self.f1.ncomp != 3 or self.f2.ncomp != 1 or self.f3.ncomp != 3:
            raise ConfigurationError("StokesData expects f1, f3 vector and f2 scalar fields")
        g = self.f1.grid
        if self.f2.grid is not g or self.f3.grid is not g:
            raise ConfigurationError("StokesData fields must share one grid")

    @property
    def grid(self):
        return self.f1.grid


def assemble(nz, D, weights, k1, k2, mu, alpha=0.0, beta=0.0, variant=STRESS):
    """Per-mode collocation matrices, shape ``(nmodes, 4 nz, 4 nz)``.

    ``k1, k2, beta`` are 1-D arrays over the modes.  Row blocks are momentum
    1, 2, 3 and continuity, each indexed by vertical node from the bottom.
    For ``k = 0`` the vertical block is re-selected: in the stress variant the
    bottom continuity row becomes the vertical momentum equation at the
    bottom node; in the Dirichlet and mixed variants the bottom continuity row becomes
    vertical momentum at the bottom node, the top continuity row becomes the
    mean-zero pressure gauge and the top ``u3`` row becomes continuity at the
    top node (the flux compatibility condition then fixes ``u3`` there).
    """
    k1 = np.atleast_1d(np.asarray(k1, float))
    k2 = np.atleast_1d(np.asarray(k2, float))
    nm = k1.size
    beta = np.broadcast_to(np.asarray(beta, float), (nm,))
    n = nz
    eye = np.eye(n)
    D2 = D @ D
    kk = k1**2 + k2**2
    L = alpha * eye[None] - mu * (D2[None] - kk[:, None, None] * eye[None])

    M = np.zeros((nm, 4 * n, 4 * n), dtype=complex)
    for i, ki in enumerate((k1, k2)):
        M[:, i * n : (i + 1) * n, i * n : (i + 1) * n] = L
        M[:, i * n : (i + 1) * n, 3 * n :] = 1j * ki[:, None, None] * eye[None]
    M[:, 2 * n : 3 * n, 2 * n : 3 * n] = L
    M[:, 2 * n : 3 * n, 3 * n :] = D[None]
    M[:, 3 * n :, 0:n] = 1j * k1[:, None, None] * eye[None]
    M[:, 3 * n :, n : 2 * n] = 1j * k2[:, None, None] * eye[None]
    M[:, 3 * n :, 2 * n : 3 * n] = D[None]

    top = n - 1
    for i in range(3):
        rb = i * n
        M[:, rb, :] = 0.0
        M[:, rb, i * n] = 1.0
        rt = i * n + top
        M[:, rt, :] = 0.0
        if variant == DIRICHLET or (variant == MIXED and i == 2):
            M[:, rt, i * n + top] = 1.0
        elif i < 2:
            ki = (k1, k2)[i]
            M[:, rt, i * n : (i + 1) * n] = -mu * D[top][None]
            M[:, rt, 2 * n + top] = -mu * 1j * ki
        else:
            M[:, rt, 3 * n + top] = 1.0
            M[:, rt, 2 * n : 3 * n] = -2.0 * mu * D[top][None]
            M[:, rt, 2 * n + top] -= beta

    zero = kk == 0.0
    if np.any(zero):
        z = np.flatnonzero(zero)
        r = 3 * n
        M[z, r, :] = 0.0
        M[np.ix_(z, [r], range(2 * n, 3 * n))] = L[z][:, :1, :]
        M[np.ix_(z, [r], range(3 * n, 4 * n))] = D[None, :1, :]
        if variant in _VELOCITY_GAUGE:
            r = 2 * n + top
            M[z, r, :] = 0.0
            M[z, r, top] = 1j * k1[z]
            M[z, r, n + top] = 1j * k2[z]
            M[np.ix_(z, [r], range(2 * n, 3 * n))] = D[None, top:, :]
            r = 3 * n + top
            M[z, r, :] = 0.0
            M[np.ix_(z, [r], range(3 * n, 4 * n))] = weights[None, None, :]
    return M


def assemble_rhs(nz, f1, f2, top, zero):
    """Right-hand sides matching :func:`assemble`.

    ``f1``: ``(3, nz, nm)``, ``f2``: ``(nz, nm)``, ``top``: ``(3, nm)`` boundary
    values at the surface; ``zero``: boolean ``(nm,)`` flagging ``k = 0``.
    Bottom boundary values are always zero.
    """
    n = nz
    nm = f2.shape[-1]
    r = np.zeros((nm, 4 * n), dtype=complex)
    for i in range(3):
        r[:, i * n : (i + 1) * n] = f1[i].T
        r[:, i * n] = 0.0
        r[:, i * n + n - 1] = top[i]
    r[:, 3 * n :] = f2.T
    if np.any(zero):
        r[zero, 3 * n] = f1[2, 0, zero]
    return r


def _gauge_fix(variant, zero, r, n):
    if variant in _VELOCITY_GAUGE and np.any(zero):
        r[zero, 3 * n - 1] = r[zero, 4 * n - 1]
        r[zero, 4 * n - 1] = 0.0
    return r


class ModeSolver:
    """Factorised per-mode solver for a fixed operator.

    Solves, for every horizontal mode selected by ``modes`` (default: all),

        alpha u - mu Lap u + grad p = f1,   div u = f2,   u = 0 at x3 = -b,

    with either ``u = f3`` (Dirichlet), ``(pI - mu D u) e3 - beta(k) u3 e3 = f3``
    (stress) or ``u3 = f3_3`` with ``-mu (D u)_{a3} = f3_a`` (mixed) at ``x3 = 0``.
    ``beta`` may be a scalar or an ``(n1, n2)`` array.  Inverses are cached,
    so repeated solves cost one batched matrix-vector product.
    """

    def __init__(self, grid: Grid, mu, alpha=0.0, beta=0.0, variant=STRESS, modes=None, cache=True):
        if variant not in (DIRICHLET, STRESS, MIXED):
            raise ConfigurationError(f"unknown Stokes variant {variant!r}")
        self.grid = grid
        self.mu = float(mu)
        self.alpha = float(alpha)
        self.variant = variant
        if modes is None:
            modes = np.ones((grid.n1, grid.n2), bool)
        self.modes = np.asarray(modes, bool)
        self.index = np.nonzero(self.modes)
        k1 = np.broadcast_to(grid.k1, self.modes.shape)[self.index]
        k2 = np.broadcast_to(grid.k2, self.modes.shape)[self.index]
        self.beta = np.broadcast_to(np.asarray(beta, float), self.modes.shape)[self.index]
        self.k1, self.k2 = k1, k2
        self.zero = (k1 == 0.0) & (k2 == 0.0)
        self._inv = None
        if cache:
            self._inv = np.empty((k1.size, 4 * grid.nz, 4 * grid.nz), complex)
            for s in self._chunks():
                M = self._matrices(s)
                try:
                    self._inv[s] = np.linalg.inv(M)
                except np.linalg.LinAlgError:
                    self._raise_singular(s, M)
                self._check_conditioning(s, M, self._inv[s])

    def _chunks(self):
        n = self.k1.size
        for a in range(0, n, _CHUNK):
            yield slice(a, min(a + _CHUNK, n))

    def _matrices(self, s):
        g = self.grid
        return assemble(
            g.nz, g.D, g.weights, self.k1[s], self.k2[s], self.mu, self.alpha, self.beta[s], self.variant
        )

    def _mode_label(self, j):
        return int(self.grid.m1[self.index[0][j]]), int(self.grid.m2[self.index[1][j]])

    def _raise_singular(self, s, M):
        for j in range(s.start, s.stop):
            try:
                np.linalg.inv(M[j - s.start])
            except np.linalg.LinAlgError:
                raise ConditioningError("singular per-mode Stokes system", self._mode_label(j)) from None
        raise ConditioningError("singular per-mode Stokes system")

    def _check_conditioning(self, s, M, Minv):
        cond = np.linalg.norm(M, 1, axis=(1, 2)) * np.linalg.norm(Minv, 1, axis=(1, 2))
        bad = ~np.isfinite(cond) | (cond > COND_LIMIT)
        if np.any(bad):
            j = s.start + int(np.flatnonzero(bad)[0])
            raise ConditioningError(f"per-mode Stokes system ill-conditioned (cond ~ {cond[j - s.start]:.3g})", self._mode_label(j))

    def solve_coef(self, f1, f2, f3):
        """Solve with spectral inputs; returns ``(u_coef, p_coef)``.

        ``f1``: ``(3, nz, n1, n2)``, ``f2``: ``(nz, n1, n2)``, ``f3``: ``(3, n1, n2)``.
        Unselected modes are returned as zero.
        """
        g = self.grid
        n = g.nz
        ix = self.index
        a1 = f1[:, :, ix[0], ix[1]]
        a2 = f2[:, ix[0], ix[1]]
        a3 = f3[:, ix[0], ix[1]]
        rhs = assemble_rhs(n, a1, a2, a3, self.zero)
        rhs = _gauge_fix(self.variant, self.zero, rhs, n)
        sol = np.empty_like(rhs)
        for s in self._chunks():
            if self._inv is not None:
                sol[s] = np.einsum("mij,mj->mi", self._inv[s], rhs[s])
            else:
                M = self._matrices(s)
                try:
                    sol[s] = np.linalg.solve(M, rhs[s][..., None])[..., 0]
                except np.linalg.LinAlgError:
                    self._raise_singular(s, M)
        if not np.all(np.isfinite(sol)):
            j = int(np.flatnonzero(~np.all(np.isfinite(sol), axis=1))[0])
            raise ConditioningError("non-finite per-mode solution", self._mode_label(j))
        u = np.zeros((3, n, g.n1, g.n2), complex)
        p = np.zeros((n, g.n1, g.n2), complex)
        for i in range(3):
            u[i][:, ix[0], ix[1]] = sol[:, i * n : (i + 1) * n].T
        p[:, ix[0], ix[1]] = sol[:, 3 * n :].T
        return u, p


def flux_defect(data: StokesData) -> float:
    """``integral_Omega f2 - integral_Sigma f3 . e3`` (zero when solvable)."""
    g = data.grid
    vol = g.area * float(np.real(g.weights @ data.f2.coef[0, :, 0, 0]))
    surf = g.area * float(np.real(data.f3.coef[2, 0, 0]))
    return vol - surf


def solve_stokes_dirichlet(data: StokesData, mu, grid: Grid | None = None, tol=1e-8):
    """Stokes problem with velocity data on the surface and no-slip bottom.

    Returns ``(u, p)`` with ``p`` normalised to mean zero over the slab.
    """
    grid = data.grid if grid is None else grid
    defect = flux_defect(data)
    scale = max(
        1.0,
        grid.area * float(np.sum(np.abs(grid.weights @ data.f2.coef[0, :, 0, 0]))),
        grid.area * abs(data.f3.coef[2, 0, 0]),
    )
    if abs(defect) > tol * scale:
        raise SolvabilityError(f"flux compatibility violated: defect {defect:.3e}")
    solver = ModeSolver(grid, mu, 0.0, 0.0, DIRICHLET, cache=False)
    u, p = solver.solve_coef(data.f1.coef, data.f2.coef[0], data.f3.coef)
    return VolumeField(grid, u), VolumeField(grid, p)


def solve_stokes_stress(data: StokesData, mu, grid: Grid | None = None):
    """Stokes problem with normal-stress data ``(pI - mu Du) e3 = f3`` on top."""
    grid = data.grid if grid is None else grid
    solver = ModeSolver(grid, mu, 0.0, 0.0, STRESS, cache=False)
    u, p = solver.solve_coef(data.f1.coef, data.f2.coef[0], data.f3.coef)
    return VolumeField(grid, u), VolumeField(grid, p)


def stokes_residual(u: VolumeField, p: VolumeField, data: StokesData, mu, variant):
    """Relative residuals of the four equations, evaluated independently.

    Operators are applied with the grid's spectral/collocation derivatives on
    nodal values: momentum on interior nodes, continuity on interior nodes,
    and both boundary conditions.  Each entry is ``max|residual| / scale``.
    """
    g = u.grid
    U = u.values
    P = p.scalar
    grads = np.stack([g.grad(U[i]) for i in range(3)])  # [i, j] = d_j u_i
    lap = np.stack([g.d1(g.d1(U[i])) + g.d2(g.d2(U[i])) + g.d3(g.d3(U[i])) for i in range(3)])
    gp = g.grad(P)
    F1 = data.f1.values
    mom = -mu * lap + gp - F1
    div = grads[0, 0] + grads[1, 1] + grads[2, 2] - data.f2.scalar
    inner = slice(1, g.nz - 1)
    f3 = data.f3.values
    if variant == DIRICHLET:
        top = g.top(U) - f3
    else:
        Dt = grads[:, :, -1] + np.swapaxes(grads[:, :, -1], 0, 1)
        top = g.top(P)[None] * np.array([0.0, 0.0, 1.0])[:, None, None] - mu * Dt[:, 2] - f3
    bot = g.bottom(U)
    scale_m = max(np.max(np.abs(mu * lap)), np.max(np.abs(gp)), np.max(np.abs(F1)), 1e-300)
    scale_d = max(np.max(np.abs(grads)), 1e-300)
    scale_b = max(np.max(np.abs(f3)), np.max(np.abs(g.top(U))), np.max(np.abs(P)), 1e-300)
    return {
        "momentum": float(np.max(np.abs(mom[:, inner]), initial=0.0) / scale_m),
        "continuity": float(np.max(np.abs(div[inner]), initial=0.0) / scale_d),
        "top": float(np.max(np.abs(top), initial=0.0) / scale_b),
        "bottom": float(np.max(np.abs(bot), initial=0.0) / max(np.max(np.abs(U)), 1e-300)),
    }
