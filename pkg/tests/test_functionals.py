import numpy as np
import pytest

from faradaylab import ContractError, FlowState, Params, SurfaceField, VolumeField, make_grid
from faradaylab.functionals import (
    TrajectoryWindow,
    ed_terms_flattened,
    ed_terms_geometric,
    evaluate_report,
    flat_energy,
    geometric_energy,
)
from faradaylab.simulate import compatible_start, initial_state, step

K = 2 * np.pi


def _static(g, eps, n=5, dt=0.01):
    S1, _ = g.surface_mesh()
    eta = SurfaceField.from_values(g, eps * np.cos(K * S1))
    return [FlowState(VolumeField.zeros(g, 3), VolumeField.zeros(g, 1), eta, j * dt) for j in range(n)]


def test_static_surface_closed_forms():
    p = Params(g=2.0, sigma=0.5)
    g = make_grid(p, 8, 8, 9)
    eps = 0.01
    r = evaluate_report(TrajectoryWindow(_static(g, eps)), p)
    s = 1 + K**2
    half = eps**2 / 2
    ebar = half * (p.g + p.sigma * K**2) * (1 + K**2 + K**4)
    assert r.Ebar1 == pytest.approx(ebar, rel=1e-12)
    assert r.E1 == pytest.approx(ebar + half * (p.sigma * s**3 + s**2), rel=1e-12)
    assert r.Dbar1 == 0.0
    assert r.D1 == pytest.approx(half * (s**1.5 + p.sigma**2 * s**3.5), rel=1e-12)
    assert r.F1 == pytest.approx(half * s**2.5, rel=1e-12)
    assert r.Kcal == pytest.approx(r.F1, rel=1e-12)
    assert r.H1 == 0.0


def test_zero_trajectory_is_zero(small_grid, params):
    g = small_grid
    states = [FlowState.zeros(g, 0.1 * j) for j in range(5)]
    r = evaluate_report(TrajectoryWindow(states), params)
    assert all(v == 0.0 for v in r.asdict().values())


@pytest.fixture(scope="module")
def trajectory():
    p = Params(amp=0.05, omega=3.0)
    g = make_grid(p, 8, 8, 13)
    s = initial_state(g, p, [{"m1": 1, "re": 2e-3}], [{"m1": 1, "re": 1e-3, "component": 0}])
    out = [compatible_start(s, p, 1e-3)]
    for _ in range(24):
        out.append(step(out[-1], p, 1e-3))
    return p, out


def _scaled(states, a):
    return [FlowState(s.u * a, s.p * a, s.eta * a, s.t) for s in states]


def test_quadratic_functionals_scale_exactly(trajectory):
    p, states = trajectory
    r1 = evaluate_report(TrajectoryWindow(states[1:6]), p)
    r2 = evaluate_report(TrajectoryWindow(_scaled(states[1:6], 2.0)), p)
    for name in ("Ebar1", "E1", "Dbar1", "D1", "F1", "Kcal"):
        assert getattr(r2, name) == pytest.approx(4 * getattr(r1, name), rel=1e-12), name
    assert r1.E1 > 0 and r1.D1 > 0 and r1.Dbar1 > 0


def test_H1_is_cubic(trajectory):
    p, states = trajectory
    a = 1e-2
    h1 = evaluate_report(TrajectoryWindow(_scaled(states[1:6], a)), p).H1
    h2 = evaluate_report(TrajectoryWindow(_scaled(states[1:6], 2 * a)), p).H1
    assert h2 / h1 == pytest.approx(8.0, rel=1e-2)


def test_window_contract(small_grid):
    states = [FlowState.zeros(small_grid, t) for t in (0.0, 0.1, 0.2, 0.3)]
    with pytest.raises(ContractError):
        TrajectoryWindow(states)
    with pytest.raises(ContractError):
        TrajectoryWindow(states + [FlowState.zeros(small_grid, 0.5)])


def test_energies_agree_to_cubic_order(trajectory):
    p, states = trajectory
    s = states[3]
    eg, ef = geometric_energy(s, p), flat_energy(s, p)
    assert abs(eg - ef) < 1e-2 * ef


def test_energy_balance_closes_on_a_trajectory(trajectory):
    p, states = trajectory
    # centred at t = 0.02, past the initial layer left by the approximate start
    w = TrajectoryWindow(states[18:23])
    for terms in (ed_terms_geometric(w, p), ed_terms_flattened(w, p)):
        dE, diss, work = terms
        assert dE < 0 and diss > 0
        assert abs(sum(terms)) < 1e-2 * diss  # O(dt^2) error at dt = 1e-3
