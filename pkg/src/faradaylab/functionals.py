"""Energy and dissipation functionals at ``n = 1`` and energy-dissipation residuals.

Time derivatives come from centred differences over a window of snapshots,
never from the equations, so the residuals check the stepper from outside.

Expansion used at ``n = 1`` (space-time multi-indices use the parabolic count
``|alpha| = 2 alpha_0 + alpha_1 + alpha_2``, horizontal derivatives only)::

    Ebar1 = sum_{|alpha| <= 2} ||d^a u||_0^2 + g ||d^a eta||_0^2 + sigma ||grad d^a eta||_0^2
    E1    = Ebar1 + ||u||_2^2 + ||dt u||_0^2 + ||p||_1^2 + sigma ||eta||_3^2
            + ||eta||_2^2 + ||dt eta||_{3/2}^2
    Dbar1 = sum_{|alpha| <= 2} ||D d^a u||_0^2
    D1    = Dbar1 + ||u||_3^2 + ||dt u||_1^2 + ||p||_2^2 + ||eta||_{3/2}^2
            + sigma^2 ||eta||_{7/2}^2 + ||dt eta||_1^2 + sigma^2 ||dt eta||_{5/2}^2
            + ||dt^2 eta||_0^2 + sigma^2 ||dt^2 eta||_{1/2}^2
    F1    = ||eta||_{5/2}^2
    Kcal  = ||u||_{C^2_b}^2 + ||u||_{H^3(Sigma)}^2 + ||p||_{H^3(Sigma)}^2 + ||eta||_{5/2}^2
    H1    = int_Omega -p F21 J + |dt u|^2 (J - 1)/2

The ``C^2_b`` norm is the sum over ``|alpha| <= 2`` of nodal maxima of the
pointwise Euclidean norm of ``d^alpha u``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from itertools import product

import numpy as np

from .errors import ContractError
from .forcing import compute_F21, compute_G
from .geometry import build_geometry
from .grid import SurfaceField, VolumeField, sobolev_norm_surface, sobolev_norm_volume
from .state import FlowState

_HORIZONTAL = [(a, b) for a in range(3) for b in range(3) if a + b <= 2]


@dataclass(frozen=True)
class EnergyReport:
    Ebar1: float
    E1: float
    Dbar1: float
    D1: float
    F1: float
    Kcal: float
    H1: float

    def asdict(self):
        return asdict(self)


class TrajectoryWindow:
    """At least five snapshots at uniform spacing; the report is at the centre."""

    def __init__(self, states, rtol=1e-8):
        states = list(states)
        if len(states) < 5:
            raise ContractError(f"window needs at least 5 snapshots, got {len(states)}")
        t = np.array([s.t for s in states])
        d = np.diff(t)
        if np.any(d <= 0):
            raise ContractError("snapshot times must be strictly increasing")
        if np.max(np.abs(d - d[0])) > rtol * max(abs(d[0]), 1e-300) + 1e-14:
            raise ContractError("snapshots must be uniformly spaced")
        self.states = states
        self.dt = float(d.mean())
        self.c = len(states) // 2

    @property
    def center(self) -> FlowState:
        return self.states[self.c]

    def d1(self, get):
        """Centred first difference of ``get(state)`` at the centre."""
        s = self.states
        return (get(s[self.c + 1]) - get(s[self.c - 1])) / (2.0 * self.dt)

    def d2(self, get):
        s = self.states
        return (get(s[self.c + 1]) - 2.0 * get(s[self.c]) + get(s[self.c - 1])) / self.dt**2


# spectral helpers ------------------------------------------------------------


def _vol_sq(grid, coef, mult=1.0):
    """``sum_m mult(m) int |c_m(z)|^2 dz * area`` summed over leading axes."""
    a = np.abs(coef) ** 2
    sq = np.einsum("z,nzab->ab", grid.weights, a.reshape((-1,) + a.shape[-3:]))
    return float(np.sum(mult * sq) * grid.area)


def _surf_sq(grid, coef, mult=1.0):
    return float(np.sum(mult * np.abs(coef) ** 2) * grid.area)


def _spectral_grad(grid, c):
    """Gradient of a spectral volume array, new leading axis of length 3."""
    return np.stack([grid._dk1 * c, grid._dk2 * c, grid.d3(c)])


def _sym_sq(grid, uc, mult):
    """``||D d^a u||_0^2`` summed with weight ``mult``; ``uc`` is ``(3, nz, n1, n2)``."""
    G = np.stack([_spectral_grad(grid, uc[i]) for i in range(3)])  # G[i, j] = d_j u_i
    D = G + np.swapaxes(G, 0, 1)
    return _vol_sq(grid, D, mult)


def _horizontal_mult(grid):
    k1 = np.abs(grid.k1) ** 2
    k2 = np.abs(grid.k2) ** 2
    return sum(k1**a * k2**b for a, b in _HORIZONTAL)


def _hs(grid, coef, s):
    return sobolev_norm_surface(SurfaceField(grid, coef), s) ** 2


def _hk(grid, coef, k):
    return sobolev_norm_volume(VolumeField(grid, coef), k) ** 2


def c2b_norm(grid, u_coef):
    """``sum_{|alpha| <= 2} max_x |d^alpha u(x)|`` from nodal values."""
    total = 0.0
    for a in product(range(3), repeat=3):
        if sum(a) > 2:
            continue
        c = u_coef
        for _ in range(a[0]):
            c = grid._dk1 * c
        for _ in range(a[1]):
            c = grid._dk2 * c
        for _ in range(a[2]):
            c = grid.d3(c)
        v = grid.ifft(c)
        total += float(np.max(np.sqrt(np.sum(v**2, axis=0))))
    return total


def evaluate_report(win: TrajectoryWindow, params) -> EnergyReport:
    """All ``n = 1`` functionals at the window centre."""
    s = win.center
    g = s.grid
    u = s.u.coef
    p = s.p.coef
    e = s.eta.coef[0]
    ut = win.d1(lambda x: x.u.coef)
    et = win.d1(lambda x: x.eta.coef[0])
    ett = win.d2(lambda x: x.eta.coef[0])
    sig, grav = params.sigma, params.g
    k2 = g.kmag**2
    m = _horizontal_mult(g)

    Ebar = (
        _vol_sq(g, u, m) + grav * _surf_sq(g, e, m) + sig * _surf_sq(g, e, m * k2)
        + _vol_sq(g, ut) + grav * _surf_sq(g, et) + sig * _surf_sq(g, et, k2)
    )
    E = Ebar + _hk(g, u, 2) + _vol_sq(g, ut) + _hk(g, p, 1) + sig * _hs(g, e, 3) + _hs(g, e, 2) + _hs(g, et, 1.5)
    Dbar = _sym_sq(g, u, m) + _sym_sq(g, ut, 1.0)
    D = (
        Dbar + _hk(g, u, 3) + _hk(g, ut, 1) + _hk(g, p, 2)
        + _hs(g, e, 1.5) + sig**2 * _hs(g, e, 3.5)
        + _hs(g, et, 1) + sig**2 * _hs(g, et, 2.5)
        + _hs(g, ett, 0) + sig**2 * _hs(g, ett, 0.5)
    )
    F = _hs(g, e, 2.5)
    K = (
        c2b_norm(g, u) ** 2
        + _hs(g, u[:, -1], 3)
        + _hs(g, p[:, -1], 3)
        + F
    )
    H = h1(win, params)
    return EnergyReport(Ebar, E, Dbar, D, F, K, H)


def h1(win: TrajectoryWindow, params) -> float:
    """``int_Omega -p F21 J + |dt u|^2 (J - 1)/2`` with ``dt eta`` by centred difference."""
    s = win.center
    g = s.grid
    et = SurfaceField(g, win.d1(lambda x: x.eta.coef))
    geom = build_geometry(s.eta, et, g, jacobian_floor=-np.inf)
    F21 = compute_F21(s, geom).scalar
    ut = g.ifft(win.d1(lambda x: x.u.coef))
    p = s.p.scalar
    integrand = -p * F21 * geom.J + 0.5 * np.sum(ut**2, axis=0) * (geom.J - 1.0)
    return float(g.integrate_volume(integrand))


# energy-dissipation residuals ---------------------------------------------------


def geometric_energy(state: FlowState, params) -> float:
    """``int |u|^2 J/2 + int_Sigma g eta^2/2 + sigma (sqrt(1 + |grad eta|^2) - 1)``."""
    g = state.grid
    geom = build_geometry(state.eta, None, g, jacobian_floor=-np.inf)
    u = state.u.values
    kin = 0.5 * g.integrate_volume(np.sum(u**2, axis=0) * geom.J)
    e = state.eta.coef[0]
    d1 = g.ifft(g._dk1 * e)
    d2 = g.ifft(g._dk2 * e)
    s = d1**2 + d2**2
    surf = s / (np.sqrt(1.0 + s) + 1.0)  # sqrt(1+s) - 1 without cancellation
    pot = g.integrate_surface(0.5 * params.g * g.ifft(e) ** 2 + params.sigma * surf)
    return float(kin + pot)


def flat_energy(state: FlowState, params) -> float:
    g = state.grid
    u = state.u.coef
    e = state.eta.coef[0]
    return 0.5 * _vol_sq(g, u) + 0.5 * params.g * _surf_sq(g, e) + 0.5 * params.sigma * _surf_sq(g, e, g.kmag**2)


def ed_terms_geometric(win: TrajectoryWindow, params):
    """``(dE/dt, dissipation, power)``; their sum vanishes on solutions."""
    s = win.center
    g = s.grid
    dE = win.d1(lambda x: geometric_energy(x, params))
    geom = build_geometry(s.eta, None, g, jacobian_floor=-np.inf)
    u = s.u.values
    DA = geom.sym_grad_A(u)
    diss = 0.5 * params.mu * g.integrate_volume(np.sum(DA**2, axis=(0, 1)) * geom.J)
    et = g.ifft(win.d1(lambda x: x.eta.coef[0]))
    power = params.forcing_coefficient(s.t) * g.integrate_surface(s.eta.scalar * et)
    return float(dE), float(diss), float(power)


def ed_residual_geometric(win: TrajectoryWindow, params) -> float:
    """``|d/dt E_geo + mu/2 int |D_A u|^2 J + A omega^2 f''(omega t) int eta dt eta|``."""
    return abs(sum(ed_terms_geometric(win, params)))


def ed_terms_flattened(win: TrajectoryWindow, params):
    """``(dE/dt, dissipation, -forcing work)`` for the flattened identity."""
    s = win.center
    g = s.grid
    dE = win.d1(lambda x: flat_energy(x, params))
    diss = 0.5 * params.mu * _sym_sq(g, s.u.coef, 1.0)
    G = compute_G(s, params=params)
    u = s.u.values
    p = s.p.scalar
    eta = s.eta.coef[0]
    bdry = g.ifft(params.g * eta + params.sigma * g.kmag**2 * eta)  # g eta - sigma Lap eta
    top = u[:, -1]
    work = (
        g.integrate_volume(np.sum(u * G.G1.values, axis=0) + p * G.G2.scalar)
        + g.integrate_surface(bdry * G.G3.scalar - np.sum(G.G4.values * top, axis=0) - G.G5.scalar * top[2])
    )
    return float(dE), float(diss), float(-work)


def ed_residual_flattened(win: TrajectoryWindow, params) -> float:
    return abs(sum(ed_terms_flattened(win, params)))
