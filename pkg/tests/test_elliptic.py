import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faradaylab import SurfaceField, VolumeField, make_grid
from faradaylab.elliptic import (
    StokesData,
    solve_capillary,
    solve_stokes_dirichlet,
    solve_stokes_stress,
    stokes_residual,
)
from faradaylab.errors import SolvabilityError
from faradaylab.grid import sobolev_norm_surface

from manufactured import MU, rel_error, stokes_exact


@pytest.mark.parametrize("variant", ["dirichlet", "stress"])
def test_stokes_recovers_manufactured_solution(variant):
    g = make_grid(None, 8, 8, 65)
    u, p, f1, f2, u_top, stress = stokes_exact(g)
    f3 = u_top if variant == "dirichlet" else stress
    data = StokesData(VolumeField.from_values(g, f1), VolumeField.from_values(g, f2), SurfaceField.from_values(g, f3))
    solve = solve_stokes_dirichlet if variant == "dirichlet" else solve_stokes_stress
    us, ps = solve(data, MU, g)
    assert rel_error(us.values, u) < 1e-7
    assert rel_error(ps.scalar, p) < 1e-7
    assert max(stokes_residual(us, ps, data, MU, variant).values()) < 1e-9


def test_dirichlet_rejects_flux_defect(small_grid):
    g = small_grid
    f2 = VolumeField.from_values(g, np.ones((g.nz, g.n1, g.n2)))
    data = StokesData(VolumeField.zeros(g, 3), f2, SurfaceField.zeros(g, 3))
    with pytest.raises(SolvabilityError):
        solve_stokes_dirichlet(data, 1.0, g)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.0, 3.0), st.floats(0.2, 5.0))
def test_capillary_solver_and_estimate(seed, sigma, grav):
    g = make_grid(None, 12, 12, 5)
    rng = np.random.default_rng(seed)
    c = (rng.standard_normal((g.n1, g.n2)) + 1j * rng.standard_normal((g.n1, g.n2))) * g.mask
    f = SurfaceField.from_values(g, g.ifft(c))
    psi = solve_capillary(f, sigma, grav)
    # (g - sigma Lap) psi = f, checked on nodes with an independent Laplacian
    lap = g.d1(g.d1(psi.scalar)) + g.d2(g.d2(psi.scalar))
    res = grav * psi.scalar - sigma * lap - f.scalar
    assert np.max(np.abs(res)) <= 1e-12 * max(1.0, np.max(np.abs(f.scalar)))
    for s in (0.0, 1.0, 2.5):
        assert grav * sobolev_norm_surface(psi, s) <= sobolev_norm_surface(f, s) * (1 + 1e-14)
