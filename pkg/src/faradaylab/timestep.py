"""Semi-implicit time-stepping kernel shared by the simulator and Floquet code.

The linear constant-coefficient part (Stokes with stress conditions, gravity
and surface tension, the kinematic ``dt eta = u3`` coupling) is implicit.  The
forcing terms are explicit: ``G1`` and ``G3`` enter as rates, while ``G2``,
``G4`` and ``G5`` are algebraic (constraint and boundary data) and are
evaluated at a prediction of the stage state that is refined by fixed-point
passes until the stage solution settles.  A single pass would leave an
``O(dt)`` error in the stage value that the next stage picks up through
``G1``, reducing the method to first order.

Two schemes are provided:

* ``"euler"``: IMEX Euler, first order.
* ``"ars222"``: the L-stable, stiffly accurate two-stage IMEX Runge-Kutta
  method of Ascher, Ruuth and Spiteri, second order.  Both implicit stages
  share the diagonal coefficient ``gamma = 1 - 1/sqrt(2)``, so one
  factorisation per step size serves the whole run.

Every stage solves, per horizontal mode,

    U/h - mu Lap U + grad P = rhs_u/h + mu grad G2,    div U = G2,
    (P I - mu D U) e3 = (g + sigma|k|^2) eta_stage e3 + G4 + G5 e3,
    eta_stage = rhs_eta + h U3(top),

which is the constant-coefficient stress Stokes problem with the extra
``-h(g + sigma|k|^2) U3`` term on the normal-stress row.

The kernel works on spectral coefficient arrays ``u (3, nz, *S)`` and
``eta (*S)`` through a small ``ops`` object, so the same code advances a full
field (``S = (n1, n2)``) or a batch of single-mode vectors (``S = (B,)``).
"""
from __future__ import annotations

import numpy as np

SCHEMES = ("ars222", "euler")
PICARD_TOL = 1e-7
PICARD_MAX = 12
GAMMA = 1.0 - 1.0 / np.sqrt(2.0)
DELTA = 1.0 - 1.0 / (2.0 * GAMMA)


class Explicit:
    """Explicit terms at one stage, as spectral arrays (``None`` means zero)."""

    __slots__ = ("G1", "G2", "G3", "G4")

    def __init__(self, G1=None, G2=None, G3=None, G4=None):
        self.G1, self.G2, self.G3, self.G4 = G1, G2, G3, G4

    @staticmethod
    def _lin(a, b, wa, wb):
        if a is None and b is None:
            return None
        a = 0.0 if a is None else a
        b = 0.0 if b is None else b
        return wa * a + wb * b

    def extrapolate(self, other, w):
        """``self + w (other - self)`` termwise."""
        return Explicit(*(self._lin(x, y, 1.0 - w, w) for x, y in zip(self.astuple(), other.astuple())))

    def astuple(self):
        return self.G1, self.G2, self.G3, self.G4


def _add(a, b, s=1.0):
    return a if b is None else a + s * b


class StepResult:
    """New state plus the stage pressures ``[(t_stage, P), ...]``."""

    __slots__ = ("u", "p", "eta", "stage_pressures")

    def __init__(self, u, p, eta, stage_pressures=()):
        self.u, self.p, self.eta = u, p, eta
        self.stage_pressures = list(stage_pressures)


def _stage(ops, h, mu, rhs_u, rhs_eta, alg: Explicit, G5):
    f1 = rhs_u / h
    if alg.G2 is not None:
        f1 = f1 + mu * ops.grad(alg.G2)
        f2 = alg.G2
    else:
        f2 = np.zeros_like(rhs_u[0])
    f3 = np.zeros_like(rhs_u[:, -1]) if alg.G4 is None else np.array(alg.G4, dtype=complex)
    f3[2] = f3[2] + ops.symbol * rhs_eta + G5
    U, P = ops.solve(h, f1, f2, f3)
    eta = rhs_eta + h * U[2, -1]
    return U, P, eta


def _settle(ops, h, mu, rhs_u, rhs_eta, alg, G5_pred, t, coef, ev, nonlinear):
    """Stage solve with fixed-point passes on the algebraic terms.

    Returns the stage solution and the explicit terms evaluated at it.
    """
    U, P, E = _stage(ops, h, mu, rhs_u, rhs_eta, alg, coef(t) * G5_pred)
    B = ev(U, P, E, t)
    passes = PICARD_MAX if nonlinear else 1
    for _ in range(passes):
        Un, Pn, En = _stage(ops, h, mu, rhs_u, rhs_eta, B, coef(t) * E)
        change = max(np.max(np.abs(Un - U), initial=0.0), np.max(np.abs(En - E), initial=0.0))
        scale = max(np.max(np.abs(Un), initial=0.0), np.max(np.abs(En), initial=0.0), 1e-300)
        U, P, E = Un, Pn, En
        if nonlinear:
            B = ev(U, P, E, t)
        if change <= PICARD_TOL * scale:
            break
    return U, P, E, B


def imex_step(u, p, eta, t, dt, *, ops, mu, coef, explicit=None, scheme="ars222"):
    """Advance spectral ``(u, p, eta)`` from ``t`` to ``t + dt``.

    ``coef(t)`` is the parametric coefficient ``A omega^2 f''(omega t)``;
    ``explicit(u, p, eta, t)`` returns an :class:`Explicit` (``None`` for the
    linearised problem, where all ``G1 .. G4`` vanish).
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    ev = explicit if explicit is not None else (lambda *a: Explicit())
    top = u[2, -1]

    B1 = ev(u, p, eta, t)
    if scheme == "euler":
        rhs_u = _add(u, B1.G1, dt)
        rhs_eta = _add(eta, B1.G3, dt)
        pred = rhs_eta + dt * top
        U, P, E = _stage(ops, dt, mu, rhs_u, rhs_eta, B1, coef(t + dt) * pred)
        return StepResult(U, P, E, [(t + dt, P)])

    h = GAMMA * dt
    nonlinear = explicit is not None
    # stage 2 at t + gamma dt
    t2 = t + h
    rhs_u2 = _add(u, B1.G1, h)
    rhs_e2 = _add(eta, B1.G3, h)
    pred2 = rhs_e2 + h * top
    U2, P2, E2, B2 = _settle(ops, h, mu, rhs_u2, rhs_e2, B1, pred2, t2, coef, ev, nonlinear)
    Lu2 = (U2 - rhs_u2) / h  # implicit u-rate at stage 2
    Le2 = U2[2, -1]

    # stage 3 at t + dt (its value is the new state)
    t3 = t + dt
    g1 = Explicit._lin(B1.G1, B2.G1, DELTA, 1.0 - DELTA)
    g3 = Explicit._lin(B1.G3, B2.G3, DELTA, 1.0 - DELTA)
    rhs_u3 = _add(u + dt * (1.0 - GAMMA) * Lu2, g1, dt)
    rhs_e3 = _add(eta + dt * (1.0 - GAMMA) * Le2, g3, dt)
    pred3 = eta + dt * (DELTA * _add(top, B1.G3) + (1.0 - DELTA) * _add(Le2, B2.G3))
    alg3 = B1.extrapolate(B2, 1.0 / GAMMA)
    U3, P3, E3, _ = _settle(ops, h, mu, rhs_u3, rhs_e3, alg3, pred3, t3, coef, ev, nonlinear)
    return StepResult(U3, P3, E3, [(t2, P2), (t3, P3)])
