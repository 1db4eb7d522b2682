"""Nonlinear time integration of the flattened free-boundary system.

One step builds the geometry, evaluates the forcing terms of
:mod:`faradaylab.forcing` and solves the constant-coefficient Stokes problem
with the implicit gravity/surface-tension coupling (see
:mod:`faradaylab.timestep`).  ``eta`` is kept mean-zero by
:func:`project_mean` after every step.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .elliptic import MIXED, STRESS, ModeSolver
from .errors import ConfigurationError, ContractError, FlatteningDegenerate, NumericalError
from .forcing import forcing_arrays, kinematic_dt_eta
from .geometry import JACOBIAN_FLOOR, build_geometry
from .grid import Grid, SurfaceField, VolumeField, make_grid
from .params import Params
from .state import FlowState
from .timestep import SCHEMES, Explicit, imex_step

log = logging.getLogger(__name__)

__all__ = [
    "FlowState",
    "RunConfig",
    "project_mean",
    "step",
    "step_with_info",
    "initial_state",
    "consistent_pressure",
    "project_compatible",
    "compatible_start",
    "run",
    "fit_decay",
    "fit_algebraic",
    "eulerian_residual",
]

CFL_SAFETY = 0.5


def project_mean(eta: SurfaceField) -> SurfaceField:
    """Set the ``(0, 0)`` coefficient to exactly zero."""
    c = np.array(eta.coef)
    c[:, 0, 0] = 0.0
    return SurfaceField(eta.grid, c)


# ---------------------------------------------------------------------------
# kernel adaptors


class _GridOps:
    """``timestep`` operations for full ``(n1, n2)`` spectral arrays."""

    def __init__(self, grid: Grid, params: Params):
        self.grid = grid
        self.params = params
        self.symbol = params.g + params.sigma * grid.kmag**2

    def solve(self, h, f1, f2, f3):
        return _stage_solver(self.grid, self.params.mu, self.params.g, self.params.sigma, float(h)).solve_coef(f1, f2, f3)

    def grad(self, f):
        g = self.grid
        return np.stack([g._dk1 * f, g._dk2 * f, g.d3(f)])


@lru_cache(maxsize=16)
def _stage_solver(grid, mu, g, sigma, h):
    beta = h * (g + sigma * grid.kmag**2)
    return ModeSolver(grid, mu, alpha=1.0 / h, beta=beta, variant=STRESS, modes=grid.mask)


def _explicit_fn(grid: Grid, params: Params, extra=None, jacobian_floor=JACOBIAN_FLOOR):
    """Explicit forcing from spectral stage data; ``extra(t)`` adds user terms."""

    def ev(uc, pc, ec, t):
        u = grid.ifft(uc)
        p = grid.ifft(pc)
        eta = SurfaceField(grid, ec[None])
        geom = build_geometry(eta, kinematic_dt_eta(u, eta), grid, jacobian_floor=jacobian_floor)
        G1, G2, G3, G4, _ = forcing_arrays(u, p, eta, t, params, geom)
        out = Explicit(grid.fft(G1), grid.fft(G2), grid.fft(G3), grid.fft(G4))
        if extra is not None:
            e1, e2, e3, e4 = extra(t)
            out = Explicit(*(x if y is None else x + y for x, y in zip(out.astuple(), (e1, e2, e3, e4))))
        return out

    return ev


def _min_spacing(grid: Grid):
    return min(grid.L1 / grid.n1, grid.L2 / grid.n2, float(np.min(np.diff(grid.z))))


def check_cfl(state: FlowState, dt):
    umax = float(np.max(np.abs(state.u.values), initial=0.0))
    if umax > 0 and dt > CFL_SAFETY * _min_spacing(state.grid) / umax:
        raise NumericalError(
            f"CFL violation: dt = {dt:.3g} > {CFL_SAFETY} * dx_min / max|u| = "
            f"{CFL_SAFETY * _min_spacing(state.grid) / umax:.3g}"
        )


def _advance(state: FlowState, params: Params, dt, scheme, extra, jacobian_floor):
    if not dt > 0:
        raise ConfigurationError(f"must be > 0, got {dt!r}", "run.dt")
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}", "run.scheme")
    grid = state.grid
    check_cfl(state, dt)
    ops = _GridOps(grid, params)
    ev = _explicit_fn(grid, params, extra, jacobian_floor)
    try:
        return imex_step(
            state.u.coef, state.p.coef[0], state.eta.coef[0], state.t, dt,
            ops=ops, mu=params.mu, coef=params.forcing_coefficient, explicit=ev, scheme=scheme,
        )
    except FlatteningDegenerate as exc:
        raise FlatteningDegenerate(exc.min_jacobian, exc.floor, state) from None


def step_with_info(state: FlowState, params: Params, dt, *, scheme="ars222", extra=None, project=True,
                   jacobian_floor=JACOBIAN_FLOOR):
    """One step; returns ``(new_state, info)`` with the pre-projection mean of eta."""
    grid = state.grid
    res = _advance(state, params, dt, scheme, extra, jacobian_floor)
    eta = SurfaceField(grid, res.eta[None])
    drift = float(eta.coef[0, 0, 0].real)
    if project:
        eta = project_mean(eta)
    new = FlowState(VolumeField(grid, res.u), VolumeField(grid, res.p[None]), eta, state.t + dt)
    return new, {"mean_drift": drift}


def consistent_pressure(state: FlowState, params: Params, dt, *, scheme="ars222", extra=None, passes=3,
                        jacobian_floor=JACOBIAN_FLOOR) -> FlowState:
    """Replace ``state.p`` by a pressure consistent with ``(u, eta)``.

    The pressure is not a dynamic variable, but the explicit terms read it at
    the start of a step; an arbitrary starting pressure therefore costs one
    order of accuracy.  Each pass takes a trial step and extrapolates its
    stage pressures back to ``state.t``; the error contracts by a factor of
    the order of the data size per pass.
    """
    s = state
    for _ in range(passes):
        res = _advance(s, params, dt, scheme, extra, jacobian_floor)
        sp = res.stage_pressures
        if len(sp) == 1:
            p0 = sp[0][1]
        else:
            (ta, Pa), (tb, Pb) = sp[-2], sp[-1]
            p0 = Pa + (Pa - Pb) * (ta - s.t) / (tb - ta)
        s = FlowState(s.u, VolumeField(s.grid, p0[None]), s.eta, s.t)
    return s


def step(state: FlowState, params: Params, dt, *, scheme="ars222", extra=None, project=True) -> FlowState:
    """Advance ``state`` by ``dt``."""
    return step_with_info(state, params, dt, scheme=scheme, extra=extra, project=project)[0]


# ---------------------------------------------------------------------------
# initial data


def _descriptor_field(grid: Grid, modes, ncomp):
    c = np.zeros((ncomp, grid.n1, grid.n2), complex)
    for i, d in enumerate(modes):
        path = f"run.initial[{i}]"
        try:
            m1, m2 = int(d.get("m1", 0)), int(d.get("m2", 0))
            amp = complex(float(d.get("re", 0.0)), float(d.get("im", 0.0)))
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(str(exc), path) from None
        comp = int(d.get("component", 0))
        if not (0 <= comp < ncomp):
            raise ConfigurationError(f"component out of range: {comp}", path)
        if not (-grid.n1 // 3 < m1 < grid.n1 // 3 + 1 and -grid.n2 // 3 < m2 < grid.n2 // 3 + 1):
            raise ConfigurationError(f"mode ({m1}, {m2}) outside the dealiased band", path)
        # real field: the amplitude is split between m and -m
        c[comp, m1 % grid.n1, m2 % grid.n2] += 0.5 * amp
        c[comp, -m1 % grid.n1, -m2 % grid.n2] += 0.5 * np.conj(amp)
    return c * grid.mask


def project_compatible(state: FlowState, params: Params, u_target=None, iterations=30, tol=1e-13) -> FlowState:
    """Velocity satisfying the constraints the stepper enforces at every stage.

    Solves ``-mu Lap u + grad q = -mu Lap u_target``, ``div u = G2`` with
    ``u = 0`` on the bottom, ``u3 = u_target3`` and the tangential stress
    condition ``-mu (D u)_{a3} = G4_a`` on top, where ``G2, G4`` are evaluated
    at the current iterate (and ``state.p``).  The fixed point is iterated
    until the update is below ``tol`` relative to ``max|u|``.  Data that
    violate these conditions would be projected by the first step, and the
    jump costs the stepper one order of accuracy.
    """
    from .forcing import compute_G

    grid = state.grid
    target = state.u.coef if u_target is None else u_target
    lap = lambda c: grid.d3(grid.d3(c)) - grid.kmag**2 * c
    f1 = -params.mu * np.stack([lap(target[i]) for i in range(3)])
    solver = ModeSolver(grid, params.mu, 0.0, 0.0, MIXED, modes=grid.mask)
    s = state
    for _ in range(iterations):
        G = compute_G(s, params=params)
        G2 = G.G2.coef[0]
        top = np.array(G.G4.coef)
        top[2] = target[2, -1]
        # flux compatibility fixes the mean normal velocity on top
        top[2, 0, 0] = np.einsum("z,z->", grid.weights, G2[:, 0, 0])
        u, _ = solver.solve_coef(f1, G2, top)
        change = np.max(np.abs(u - s.u.coef))
        s = FlowState(VolumeField(grid, u), s.p, s.eta, s.t)
        if change <= tol * max(np.max(np.abs(u)), 1e-300):
            break
    return s


def initial_state(grid: Grid, params: Params, eta_modes=(), u_modes=(), t0=0.0) -> FlowState:
    """Initial data from spectral amplitude descriptors.

    Each descriptor is a mapping ``{"m1", "m2", "re", "im"}`` (plus
    ``"component"`` for velocity) giving the real field
    ``re cos(k.x) - im sin(k.x)``.  Velocity modes carry the vertical profile
    ``(1 + x3/b)^2``; the velocity is then made compatible by
    :func:`project_compatible` (with zero pressure; :func:`compatible_start`
    also fixes the pressure once the step size is known).
    """
    eta = project_mean(SurfaceField(grid, _descriptor_field(grid, eta_modes, 1)))
    build_geometry(eta, None, grid)  # fail early on degenerate surfaces
    u_raw = _descriptor_field(grid, u_modes, 3)[:, None] * (grid.btilde**2)[None]
    s = FlowState(VolumeField(grid, u_raw), VolumeField.zeros(grid, 1), eta, float(t0))
    if np.any(u_raw) or np.any(eta.coef):
        s = project_compatible(s, params, u_raw)
    return s


def compatible_start(state: FlowState, params: Params, dt, *, scheme="ars222", extra=None, rounds=3) -> FlowState:
    """Alternate :func:`consistent_pressure` and :func:`project_compatible`.

    The tangential stress data depend on the pressure, so the two are
    coupled; the coupling is quadratic in the data and a few rounds suffice.
    """
    target = state.u.coef
    s = state
    for _ in range(rounds):
        s = consistent_pressure(s, params, dt, scheme=scheme, extra=extra)
        s = project_compatible(s, params, target)
    return consistent_pressure(s, params, dt, scheme=scheme, extra=extra)


# ---------------------------------------------------------------------------
# runs


@dataclass
class RunConfig:
    """Time-integration settings.

    ``eta_modes``/``u_modes`` are spectral amplitude descriptors (see
    :func:`initial_state`).  ``stride`` is the snapshot interval in steps.
    """

    dt: float = 1e-3
    t_end: float = 0.1
    stride: int = 10
    n1: int = 16
    n2: int = 16
    nz: int = 17
    scheme: str = "ars222"
    eta_modes: list = field(default_factory=list)
    u_modes: list = field(default_factory=list)
    diagnostics: bool = True
    save_fields: bool = True
    project: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigurationError(f"must be > 0, got {self.dt!r}", "run.dt")
        if not self.t_end >= self.dt:
            raise ConfigurationError(f"must be >= dt, got {self.t_end!r}", "run.t_end")
        if int(self.stride) != self.stride or self.stride < 1:
            raise ConfigurationError(f"must be a positive integer, got {self.stride!r}", "run.stride")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}", "run.scheme")

    @property
    def nsteps(self):
        return int(round(self.t_end / self.dt))


@dataclass
class RunResult:
    times: list
    states: list  # snapshots at the stride
    diagnostics: list  # dicts, one per snapshot with a full window
    drift: list  # pre-projection mean of eta, per step
    final: FlowState = None
    aborted: str | None = None


DIAG_COLUMNS = ("t", "Ebar1", "E1", "Dbar1", "D1", "F1", "Kcal", "H1", "ed_residual")


def run(config: RunConfig, params: Params, output=None, *, initial: FlowState | None = None, extra=None,
        callback=None) -> RunResult:
    """Integrate to ``t_end`` and record snapshots and diagnostics.

    Diagnostics are evaluated on five consecutive steps centred on each
    snapshot (so the first and last snapshots have none).  With ``output`` set,
    a trajectory directory is written: ``manifest.json``, one binary field file
    per snapshot under ``fields/`` and ``diagnostics.csv``; partial results are
    flushed before any error propagates.
    """
    from . import fieldio
    from .functionals import TrajectoryWindow, ed_residual_geometric, evaluate_report

    grid = make_grid(params, config.n1, config.n2, config.nz)
    if initial is None:
        state = initial_state(grid, params, config.eta_modes, config.u_modes)
        state = compatible_start(state, params, config.dt, scheme=config.scheme, extra=extra)
    else:
        state = initial
    out = Path(output) if output is not None else None
    writer = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "fields").mkdir(exist_ok=True)
        writer = fieldio.DiagnosticsWriter(out / "diagnostics.csv", DIAG_COLUMNS)
    t_start = time.perf_counter()
    res = RunResult([], [], [], [])
    history = [state]  # last five steps
    pending = []  # snapshot indices awaiting their window

    def snapshot(s, k):
        res.times.append(s.t)
        res.states.append(s)
        if out is not None and config.save_fields:
            fieldio.write_state(out / "fields" / f"state_{k:06d}.bin", s)
        pending.append(k)

    def flush_diag(n):
        # the window for snapshot k is steps k-2 .. k+2
        while pending and config.diagnostics:
            k = pending[0]
            if k < 2:
                pending.pop(0)
                continue
            if k + 2 > n:
                break
            pending.pop(0)
            if k + 2 < n or len(history) < 5:
                continue
            win = TrajectoryWindow(list(history))
            rep = evaluate_report(win, params)
            row = dict(t=win.center.t, **rep.asdict(), ed_residual=ed_residual_geometric(win, params))
            res.diagnostics.append(row)
            if writer is not None:
                writer.write(row)

    nsteps_done = 0
    snapshot(state, 0)
    try:
        for n in range(1, config.nsteps + 1):
            state, info = step_with_info(state, params, config.dt, scheme=config.scheme, extra=extra,
                                         project=config.project)
            res.drift.append(info["mean_drift"])
            nsteps_done = n
            history.append(state)
            if len(history) > 5:
                history.pop(0)
            if n % config.stride == 0:
                snapshot(state, n)
            flush_diag(n)
            if callback is not None:
                callback(n, state)
    except (NumericalError, ConfigurationError) as exc:
        res.aborted = str(exc)
        raise
    finally:
        res.final = state
        if writer is not None:
            writer.close()
        if out is not None:
            manifest = {
                "kind": "trajectory",
                "version": __version__,
                "params": params_dict(params),
                "config": asdict(config),
                "grid": {"n1": grid.n1, "n2": grid.n2, "nz": grid.nz},
                "snapshots": [
                    {"t": t, "file": f"fields/state_{k:06d}.bin"}
                    for t, k in zip(res.times, range(0, config.nsteps + 1, config.stride))
                ] if config.save_fields else [],
                "steps_completed": nsteps_done,
                "aborted": res.aborted,
                "wall_time_s": time.perf_counter() - t_start,
            }
            (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return res


def params_dict(params: Params):
    d = asdict(params)
    d["profile"] = {"cos": list(params.profile.cos), "sin": list(params.profile.sin)}
    return d


# ---------------------------------------------------------------------------
# decay fits


def _series(series):
    a = np.asarray(series, float)
    if a.ndim != 2 or a.shape[1] != 2:
        raise ContractError("series must be a sequence of (t, E) pairs")
    if a.shape[0] < 10:
        raise ContractError(f"need at least 10 samples, got {a.shape[0]}")
    if not np.all(np.isfinite(a)) or np.any(a[:, 1] <= 0):
        raise ContractError("values must be finite and positive")
    return a[:, 0], a[:, 1]


def _linfit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    fit = A @ coef
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return coef, r2


def fit_decay(series):
    """Least-squares ``log E = c - lambda t``; returns ``(lambda, r2)``."""
    t, e = _series(series)
    (slope, _), r2 = _linfit(t, np.log(e))
    return float(-slope), float(r2)


def fit_algebraic(series, exponent=None):
    """Fit ``E = C (1 + t)^q``.

    With ``exponent`` given, ``q`` is fixed and the result is ``(C, r2)``;
    otherwise ``q`` is fitted and ``(q, r2)`` is returned.
    """
    t, e = _series(series)
    x = np.log1p(t)
    y = np.log(e)
    if exponent is None:
        (slope, _), r2 = _linfit(x, y)
        return float(slope), float(r2)
    c = float(np.mean(y - exponent * x))
    res = y - (c + exponent * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(res**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(np.exp(c)), r2


# ---------------------------------------------------------------------------
# frame equivalence


def _column_interp(grid: Grid, values, x3):
    """Evaluate nodal columns ``values (..., nz, n1, n2)`` at heights ``x3 (m, n1, n2)``."""
    from numpy.polynomial import chebyshev as C

    s = 2.0 * x3 / grid.b + 1.0  # map [-b, 0] -> [-1, 1]
    lead = values.shape[:-3]
    v = values.reshape((-1,) + values.shape[-3:])
    out = np.empty((v.shape[0],) + x3.shape)
    # interpolating Chebyshev series through the Lobatto nodes, per column
    ref = -np.cos(np.pi * np.arange(grid.nz) / (grid.nz - 1))
    V = C.chebvander(ref, grid.nz - 1)
    Vinv = np.linalg.inv(V)
    for c in range(v.shape[0]):
        coef = np.einsum("ij,jab->iab", Vinv, v[c])
        for r in range(x3.shape[0]):
            out[c, r] = C.chebval(s[r], coef, tensor=False)
    return out.reshape(lead + x3.shape)


def _height_map(grid: Grid, eta: SurfaceField):
    """``x3 -> x3 + eta_hat(x', x3)(1 + x3/b)`` at the nodes and its nodal ``eta_hat``."""
    from .grid import poisson_extend

    eh = poisson_extend(eta, grid).scalar
    return eh


def _pullback(grid: Grid, state: FlowState, y3, iters=30):
    """Flattened heights ``x3`` with ``Phi_3(x', x3) = y3`` for ``state``'s surface."""
    eh = _height_map(grid, state.eta)
    x3 = np.array(y3, dtype=float)
    for _ in range(iters):
        e = _column_interp(grid, eh, x3)
        de = _column_interp(grid, grid.d3(eh), x3)
        bt = 1.0 + x3 / grid.b
        F = x3 + e * bt - y3
        dF = 1.0 + de * bt + e / grid.b
        step = F / dF
        x3 = x3 - step
        if np.max(np.abs(step)) < 1e-15:
            break
    return x3


def eulerian_residual(prev: FlowState, cur: FlowState, nxt: FlowState, params: Params):
    """Residuals of the moving-domain equations at ``cur``, relative to their terms.

    The velocity ``v = u o Phi^{-1}`` and pressure are evaluated at fixed
    Eulerian points ``y = Phi(x, t)`` (``x`` the nodes at time ``t``) for the
    neighbouring snapshots by inverting ``Phi`` column by column, so ``dt v``
    is a genuine fixed-point centred difference rather than the chain-rule
    expression used by the flattened equations.  Spatial derivatives use the
    chain rule (``grad_A``).  Returned: momentum ``dt v + v.grad v + div S``,
    incompressibility, kinematic condition and the stress balance
    ``S n = (-sigma H + (g + A omega^2 f'') eta) n`` at the surface (gravity
    appears through the boundary after the change of pressure variable).
    """
    from .geometry import mean_curvature

    grid = cur.grid
    dt = nxt.t - cur.t
    if not np.isclose(cur.t - prev.t, dt):
        raise ContractError("frame check needs uniformly spaced states")
    geom = build_geometry(cur.eta, None, grid)
    X1, X2, X3 = grid.mesh()
    y3 = X3 + geom.eta_hat.scalar * grid.btilde
    # interior nodes only: the surface moves, so top points may leave the fluid
    y3 = y3[1:-1]
    vals = []
    for s in (prev, nxt):
        x3 = _pullback(grid, s, y3)
        vals.append(_column_interp(grid, s.u.values, x3))
    dtv = (vals[1] - vals[0]) / (2.0 * dt)

    u = cur.u.values
    p = cur.p.scalar
    S = geom.stress_A(u, p, params.mu)
    conv = grid.dealias(np.einsum("j...,ij...->i...", u, geom.grad_tensor_A(u)))
    divS = geom.div_A_tensor(S)
    mom = dtv + conv[:, 1:-1] + divS[:, 1:-1]
    scale = max(float(np.max(np.abs(dtv))), float(np.max(np.abs(divS))), 1e-300)

    Gc = np.stack([grid.grad(u[i]) for i in range(3)])
    inc = geom.div_A(u)
    deta = (nxt.eta.values[0] - prev.eta.values[0]) / (2.0 * dt)
    kin = deta - grid.dealias(np.einsum("i...,i...->...", u[:, -1], geom.N))
    H = mean_curvature(cur.eta, grid).H.scalar
    eta = cur.eta.scalar
    c = -params.sigma * H + (params.g + params.forcing_coefficient(cur.t)) * eta
    Stop = S[:, :, -1]
    bc = grid.dealias(np.einsum("ij...,j...->i...", Stop, geom.N) - c * geom.N)

    def rel(a, ref):
        return float(np.max(np.abs(a))) / max(float(np.max(np.abs(ref))), 1e-300)

    return {
        "momentum": float(np.max(np.abs(mom))) / scale,
        "divergence": rel(inc, Gc),
        "kinematic": rel(kin, deta),
        "stress": rel(bc, Stop),
    }
