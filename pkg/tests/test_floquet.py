import numpy as np
import pytest

from faradaylab import ContractError, OscillationProfile, Params
from faradaylab.floquet import (
    classify,
    default_k_samples,
    dominant_multiplier,
    mathieu_normal_form,
    mathieu_oracle,
    monodromy,
    monodromy_batch,
    stability_sweep,
    threshold_amp,
)

K = 2 * np.pi


def test_unforced_problem_is_stable():
    p = Params(amp=0.0, omega=5.0)
    M = monodromy_batch(default_k_samples(p, 4), p, nz=13, steps=200)
    assert all(dominant_multiplier(m) < 1.0 for m in M)


def test_batch_matches_single_mode():
    p = Params(amp=0.4, omega=5.0)
    ks = np.array([[K, 0.0], [0.0, 2 * K]])
    Mb = monodromy_batch(ks, p, nz=13, steps=100)
    for k, m in zip(ks, Mb):
        assert np.allclose(monodromy(k, p, 13, steps=100), m, atol=1e-13)


@pytest.mark.parametrize("delta", [np.pi / 3, np.pi])
def test_spectrum_is_invariant_under_phase_shift(delta):
    # a shifted profile conjugates the period map, so multipliers agree
    p0 = Params(amp=0.8, omega=5.0)
    p1 = p0.with_(profile=OscillationProfile.cosine(delta))
    steps = 240  # delta / (2 pi) is a whole number of steps
    M0 = monodromy([K, 0.0], p0, 13, steps=steps)
    M1 = monodromy([K, 0.0], p1, 13, steps=steps)
    e0 = np.sort(np.abs(np.linalg.eigvals(M0)))[::-1][:6]
    e1 = np.sort(np.abs(np.linalg.eigvals(M1)))[::-1][:6]
    assert np.allclose(e0, e1, atol=1e-8)


def test_step_count_must_divide_period():
    p = Params(omega=5.0)
    with pytest.raises(ContractError):
        monodromy([K, 0.0], p, 9, dt=p.period / 2.5)


def test_mathieu_tongue_tip():
    q = 0.001
    a = np.linspace(0.99, 1.01, 201)
    unstable = [dominant_multiplier(mathieu_normal_form(x, q)) > 1 + 1e-9 for x in a]
    inside = a[np.array(unstable)]
    assert inside.min() < 1.0 < inside.max()
    assert inside.max() - inside.min() <= 0.01
    # first-order theory: the tongue is 1 - q < a < 1 + q
    assert inside.min() == pytest.approx(1 - q, abs=2e-4)
    assert inside.max() == pytest.approx(1 + q, abs=2e-4)


def test_mathieu_monodromy_is_area_preserving():
    for a, q in ((1.0, 0.001), (0.3, 0.2), (2.5, 0.5)):
        assert np.linalg.det(mathieu_normal_form(a, q)) == pytest.approx(1.0, abs=1e-9)


def test_inviscid_oracle_is_neutral_without_forcing():
    assert mathieu_oracle(K, Params(amp=0.0, omega=5.0)) == pytest.approx(1.0, abs=1e-9)


def test_viscosity_raises_the_threshold():
    # the damped problem needs more forcing than the inviscid one
    p = Params(omega=5.0, amp=0.3)
    assert mathieu_oracle(K, p) > 1.0
    assert dominant_multiplier(monodromy([K, 0.0], p, 13, steps=200)) < 1.0


def test_threshold_bisection_brackets_unit_multiplier():
    p = Params(omega=5.0)
    a = threshold_amp(K, p, 0.5, 1.0, nz=13, steps=200, tol=1e-3)
    lo = dominant_multiplier(monodromy([K, 0.0], p.with_(amp=a - 2e-3), 13, steps=200))
    hi = dominant_multiplier(monodromy([K, 0.0], p.with_(amp=a + 2e-3), 13, steps=200))
    assert lo < 1.0 < hi


def test_sweep_and_csv(tmp_path):
    p = Params()
    ks = default_k_samples(p, 3)
    m = stability_sweep([0.0, 1.0], [5.0], p, ks, nz=11, steps=100)
    assert m.multipliers.shape == (2, 1, len(ks))
    assert m.classification()[0, 0] == "stable"
    m.write_csv(tmp_path / "a.csv")
    m.write_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "amp,omega,k1,k2,multiplier,classification"


def test_classify():
    assert classify(0.5) == "stable" and classify(1.5) == "unstable" and classify(1.0) == "marginal"
