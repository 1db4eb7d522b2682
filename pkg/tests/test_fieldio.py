import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from faradaylab import FlowState, SurfaceField, VolumeField, make_grid
from faradaylab.fieldio import field_from_csv, field_to_csv, read_field, read_state, write_field, write_state

G = make_grid(None, 6, 4, 5, L1=2.0, b=0.5)


def _random(seed, surface):
    rng = np.random.default_rng(seed)
    if surface:
        return SurfaceField.from_values(G, rng.standard_normal((1, G.n1, G.n2)))
    return VolumeField.from_values(G, rng.standard_normal((3, G.nz, G.n1, G.n2)))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.booleans())
def test_csv_roundtrip_is_exact(seed, surface):
    f = _random(seed, surface)
    text = field_to_csv(f)
    back = field_from_csv(text, G)
    assert type(back) is type(f)
    assert np.array_equal(back.coef, f.coef)
    assert field_to_csv(back) == text


def test_surface_rows_use_negative_z_index():
    rows = field_to_csv(_random(0, True)).splitlines()
    assert rows[0] == "component,m1,m2,z_index,re,im"
    assert all(r.split(",")[3] == "-1" for r in rows[1:])


def test_binary_roundtrip(tmp_path):
    f = _random(3, False)
    write_field(tmp_path / "f.bin", f, t=0.25)
    back, t = read_field(tmp_path / "f.bin")
    assert t == 0.25 and np.array_equal(back.coef, f.coef)
    assert (back.grid.L1, back.grid.b) == (2.0, 0.5)
    s = FlowState(_random(4, False), VolumeField.from_values(G, np.ones((G.nz, G.n1, G.n2))), _random(5, True), 1.5)
    write_state(tmp_path / "s.bin", s)
    r = read_state(tmp_path / "s.bin")
    assert r.t == 1.5
    for a, b in ((r.u, s.u), (r.p, s.p), (r.eta, s.eta)):
        assert np.array_equal(a.coef, b.coef)
