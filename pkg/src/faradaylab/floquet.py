"""Floquet analysis of the flat oscillating state.

Linearised about ``(u, p, eta) = 0`` the flattened system decouples into
horizontal Fourier modes.  For each wavenumber the period map is built by
propagating a basis of the nodal state ``(u1, u2, u3 at the nz nodes, eta)``
over one forcing period with the simulator's own IMEX kernel, in which the
only surviving forcing is ``G5 = A omega^2 f''(omega t) eta``.

The first step already lands on the constraint set (bottom no-slip and
``div u = 0``), so the period map has the physical multipliers plus zeros
for the directions projected out.
"""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .elliptic import STRESS, assemble, assemble_rhs
from .errors import ConfigurationError, ContractError, NumericalError
from .grid import chebyshev_lobatto
from .params import Params
from .timestep import imex_step

STABILITY_TOL = 1e-3
DEFAULT_NK = 16


class _BatchModeOps:
    """``timestep`` operations for a batch of wavenumbers and basis vectors.

    Arrays carry the trailing shape ``(nk, B)``.
    """

    def __init__(self, k, params: Params, nz):
        self.k = np.atleast_2d(np.asarray(k, float))  # (nk, 2)
        self.params = params
        self.nz = nz
        z, D, w = chebyshev_lobatto(nz, params.b)
        self.D, self.w = D, w
        kk = np.sum(self.k**2, axis=1)
        self.symbol = (params.g + params.sigma * kk)[:, None]
        self._inv = {}

    def _inverse(self, h):
        inv = self._inv.get(h)
        if inv is None:
            k1, k2 = self.k[:, 0], self.k[:, 1]
            beta = h * self.symbol[:, 0]
            M = assemble(self.nz, self.D, self.w, k1, k2, self.params.mu, 1.0 / h, beta, STRESS)
            try:
                inv = np.linalg.inv(M)
            except np.linalg.LinAlgError:
                raise NumericalError("singular per-mode system in monodromy") from None
            self._inv[h] = inv
        return inv

    def solve(self, h, f1, f2, f3):
        n = self.nz
        nk, B = f2.shape[1:]
        flat = lambda a: a.reshape(a.shape[:-2] + (nk * B,))
        zero = np.zeros(nk * B, bool)
        rhs = assemble_rhs(n, flat(f1), flat(f2), flat(f3), zero).reshape(nk, B, 4 * n)
        sol = np.matmul(rhs, np.swapaxes(self._inverse(h), 1, 2))
        U = np.stack([np.moveaxis(sol[:, :, i * n : (i + 1) * n], 2, 0) for i in range(3)])
        P = np.moveaxis(sol[:, :, 3 * n :], 2, 0)
        return U, P

    def grad(self, f):
        k1 = self.k[:, 0][:, None]
        k2 = self.k[:, 1][:, None]
        return np.stack([1j * k1 * f, 1j * k2 * f, np.einsum("ij,j...->i...", self.D, f)])


def _steps_per_period(params: Params, dt, steps):
    T = params.period
    if steps is not None:
        if int(steps) != steps or steps < 1:
            raise ContractError(f"steps must be a positive integer, got {steps!r}")
        return int(steps)
    if dt is None:
        return 200
    n = T / dt
    if abs(n - round(n)) > 1e-9 * max(n, 1.0) or round(n) < 1:
        raise ContractError(f"dt = {dt!r} does not divide the period T = {T!r}")
    return int(round(n))


def monodromy_batch(ks, params: Params, nz=17, dt=None, *, steps=None, scheme="ars222"):
    """Period maps for several wavenumbers at once; returns ``(nk, dim, dim)``."""
    ks = np.atleast_2d(np.asarray(ks, float))
    if ks.shape[1] != 2:
        raise ConfigurationError("wavenumbers must be 2-vectors")
    N = _steps_per_period(params, dt, steps)
    h = params.period / N
    ops = _BatchModeOps(ks, params, nz)
    nk = ks.shape[0]
    dim = 3 * nz + 1
    X = np.broadcast_to(np.eye(dim, dtype=complex)[:, None, :], (dim, nk, dim)).copy()
    u = X[: 3 * nz].reshape(3, nz, nk, dim)
    eta = X[3 * nz]
    p = np.zeros((nz, nk, dim), complex)
    coef = params.forcing_coefficient
    t = 0.0
    for j in range(N):
        t = j * h
        r = imex_step(u, p, eta, t, h, ops=ops, mu=params.mu, coef=coef, explicit=None, scheme=scheme)
        u, p, eta = r.u, r.p, r.eta
    M = np.concatenate([u.reshape(3 * nz, nk, dim), eta[None]], axis=0)  # (dim, nk, dim)
    return np.moveaxis(M, 1, 0)


def monodromy(k, params: Params, nz=17, dt=None, *, steps=None, scheme="ars222"):
    """Period map of the linearised system for horizontal wavenumber ``k = (k1, k2)``.

    ``dt`` must divide the period ``1/omega``; alternatively pass ``steps``.
    """
    k = np.asarray(k, float).reshape(2)
    return monodromy_batch(k[None], params, nz, dt, steps=steps, scheme=scheme)[0]


def dominant_multiplier(M) -> float:
    """Spectral radius by a dense eigensolve."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractError("matrix must be square")
    if not np.all(np.isfinite(M)):
        raise NumericalError("non-finite monodromy matrix")
    try:
        ev = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from None
    return float(np.max(np.abs(ev)))


# ---------------------------------------------------------------------------
# inviscid reduction


def _rk4_monodromy(rhs_coef, T, steps):
    """2x2 period map of ``a'' + c(t) a = 0`` by classical RK4."""
    h = T / steps
    Y = np.eye(2)

    def f(t, Y):
        return np.array([Y[1], -rhs_coef(t) * Y[0]])

    t = 0.0
    for j in range(steps):
        t = j * h
        k1 = f(t, Y)
        k2 = f(t + h / 2, Y + h / 2 * k1)
        k3 = f(t + h / 2, Y + h / 2 * k2)
        k4 = f(t + h, Y + h * k3)
        Y = Y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return Y


def mathieu_monodromy(k_scalar, params: Params, steps=4000):
    """Monodromy of ``a'' + k tanh(kb) (g + sigma k^2 + A omega^2 f''(omega t)) a = 0``."""
    if not k_scalar > 0:
        raise ContractError("k must be positive")
    disp = k_scalar * np.tanh(k_scalar * params.b)
    c = lambda t: disp * (params.g + params.sigma * k_scalar**2 + params.forcing_coefficient(t))
    return _rk4_monodromy(c, params.period, steps)


def mathieu_oracle(k_scalar, params: Params, steps=4000) -> float:
    """Dominant multiplier of the inviscid finite-depth reduction (mu is ignored)."""
    return dominant_multiplier(mathieu_monodromy(k_scalar, params, steps))


def mathieu_normal_form(a, q, steps=4000):
    """Monodromy over ``pi`` of ``x'' + (a - 2 q cos 2t) x = 0`` (test hook)."""
    return _rk4_monodromy(lambda t: a - 2.0 * q * np.cos(2.0 * t), np.pi, steps)


# ---------------------------------------------------------------------------
# sweeps


def default_k_samples(params: Params, nk=DEFAULT_NK):
    """The first ``nk`` lattice wavenumbers along each axis."""
    m = np.arange(1, nk + 1)
    a = np.stack([2 * np.pi * m / params.L1, np.zeros(nk)], axis=1)
    b = np.stack([np.zeros(nk), 2 * np.pi * m / params.L2], axis=1)
    return np.concatenate([a, b])


def classify(mult, tol=STABILITY_TOL):
    if mult < 1.0 - tol:
        return "stable"
    if mult > 1.0 + tol:
        return "unstable"
    return "marginal"


@dataclass
class StabilityMap:
    amps: np.ndarray
    omegas: np.ndarray
    k_samples: np.ndarray  # (nk, 2)
    multipliers: np.ndarray  # (na, nw, nk)
    tol: float = STABILITY_TOL
    meta: dict = field(default_factory=dict)

    @property
    def max_multiplier(self):
        return self.multipliers.max(axis=2)

    @property
    def argmax_k(self):
        return self.multipliers.argmax(axis=2)

    def classification(self):
        mm = self.max_multiplier
        return np.vectorize(lambda x: classify(x, self.tol), otypes=[object])(mm)

    def rows(self):
        cls = self.classification()
        arg = self.argmax_k
        for i, a in enumerate(self.amps):
            for j, w in enumerate(self.omegas):
                k = self.k_samples[arg[i, j]]
                yield (float(a), float(w), float(k[0]), float(k[1]), float(self.max_multiplier[i, j]), cls[i, j])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["amp", "omega", "k1", "k2", "multiplier", "classification"])
            for r in self.rows():
                w.writerow([repr(x) if isinstance(x, float) else x for x in r])

    def write_matrix(self, path):
        """Contour-ready matrix: first row omegas, first column amps."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["amp\\omega"] + [repr(float(x)) for x in self.omegas])
            for i, a in enumerate(self.amps):
                w.writerow([repr(float(a))] + [repr(float(x)) for x in self.max_multiplier[i]])


def _point(args):
    amp, omega, params, kuniq, nz, steps, scheme = args
    p = params.with_(amp=float(amp), omega=float(omega))
    ks = np.stack([kuniq, np.zeros_like(kuniq)], axis=1)
    Ms = monodromy_batch(ks, p, nz, steps=steps, scheme=scheme)
    return [dominant_multiplier(M) for M in Ms]


def stability_sweep(amp_grid, omega_grid, params: Params, k_samples=None, *, nz=13, steps=200,
                    threads=1, tol=STABILITY_TOL, scheme="ars222") -> StabilityMap:
    """Maximum Floquet multiplier over ``k_samples`` at every ``(amp, omega)``.

    The linearised problem is isotropic, so multipliers are computed once per
    distinct ``|k|``.  Work is spread over ``threads`` processes and merged in
    grid order.
    """
    amps = np.asarray(amp_grid, float).ravel()
    omegas = np.asarray(omega_grid, float).ravel()
    if amps.size == 0 or omegas.size == 0:
        raise ConfigurationError("sweep grids must be nonempty", "sweep")
    if np.any(amps < 0) or np.any(omegas <= 0):
        raise ConfigurationError("amp must be >= 0 and omega > 0", "sweep")
    ks = default_k_samples(params) if k_samples is None else np.atleast_2d(np.asarray(k_samples, float))
    kmag = np.round(np.hypot(ks[:, 0], ks[:, 1]), 12)
    kuniq, inverse = np.unique(kmag, return_inverse=True)
    jobs = [(a, w, params, kuniq, nz, steps, scheme) for a in amps for w in omegas]
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=int(threads)) as ex:
            results = list(ex.map(_point, jobs))
    else:
        results = [_point(j) for j in jobs]
    mult = np.array(results).reshape(amps.size, omegas.size, kuniq.size)[:, :, inverse.ravel()]
    return StabilityMap(amps, omegas, ks, mult, tol, {"nz": nz, "steps_per_period": steps, "scheme": scheme})


def threshold_amp(k_scalar, params: Params, lo, hi, *, nz=13, steps=200, tol=1e-4, max_iter=60):
    """Bisection in ``amp`` for the crossing of the dominant multiplier through 1."""
    f = lambda a: dominant_multiplier(
        monodromy((k_scalar, 0.0), params.with_(amp=a), nz, steps=steps)
    ) - 1.0
    flo, fhi = f(lo), f(hi)
    if not (flo < 0 < fhi):
        raise ContractError(f"no multiplier crossing bracketed in [{lo}, {hi}] (values {flo:+.3g}, {fhi:+.3g})")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * hi:
            break
    return 0.5 * (lo + hi)
