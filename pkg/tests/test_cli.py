import json

import numpy as np
import pytest

from faradaylab import ConfigurationError
from faradaylab.cli import main, parse_config

SMALL = {"grid": {"n1": 8, "n2": 8, "nz": 9}}


def _cfg(tmp_path, doc, name="c.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_defaults():
    c = parse_config("{}")
    p = c.params
    assert (p.L1, p.L2, p.b, p.g, p.mu, p.sigma) == (1.0,) * 6
    assert p.profile(0.25) == pytest.approx(0.0, abs=1e-15) and p.profile(0.0) == 1.0
    assert c.grid == {"n1": 16, "n2": 16, "nz": 17}
    assert c.threads == 1 and c.seed == 0


def test_profile_phase():
    c = parse_config('{"profile": {"type": "cosine", "delta": 1.0}}')
    assert c.params.profile(0.0) == pytest.approx(np.cos(1.0))


@pytest.mark.parametrize(
    "doc, path",
    [
        ({"bogus": 1}, "bogus"),
        ({"params": {"gravity": 1}}, "params.gravity"),
        ({"params": {"amp": "x"}}, "params.amp"),
        ({"params": {"mu": -1.0}}, "params.mu"),
        ({"grid": {"n1": 7}}, "grid.n1"),
        ({"run": {"dt": 1e-3, "extra": 1}}, "run.extra"),
        ({"profile": {"type": "square"}}, "profile.type"),
        ({"threads": 0}, "threads"),
    ],
)
def test_invalid_configs_name_the_offending_key(doc, path):
    with pytest.raises(ConfigurationError) as exc:
        parse_config(json.dumps(doc))
    if path is not None:
        assert exc.value.path == path
        assert path in str(exc.value)


def test_exit_code_for_bad_config(tmp_path, capsys):
    assert main(["sweep", "--config", _cfg(tmp_path, {"bogus": 1}), "--output", str(tmp_path / "o")]) == 2
    assert "bogus" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["sweep", "--config", str(bad)]) == 2


def test_exit_code_for_degenerate_flattening(tmp_path, capsys):
    doc = dict(SMALL, run={"dt": 1e-3, "t_end": 2e-3, "eta_modes": [{"m1": 1, "re": 0.95}]})
    assert main(["simulate", "--config", _cfg(tmp_path, doc), "--output", str(tmp_path / "o")]) == 3
    assert "flattening degenerate" in capsys.readouterr().err


def test_simulate_verify_and_fit(tmp_path):
    doc = dict(SMALL, params={"amp": 0.01, "omega": 5.0},
               run={"dt": 1e-3, "t_end": 0.016, "stride": 1, "eta_modes": [{"m1": 1, "re": 1e-4}]})
    cfg = _cfg(tmp_path, doc)
    traj = tmp_path / "traj"
    assert main(["simulate", "--config", cfg, "--output", str(traj)]) == 0
    man = json.loads((traj / "manifest.json").read_text())
    assert man["version"] and man["wall_time_s"] >= 0 and man["params"]["omega"] == 5.0
    assert main(["verify-ed", "--config", cfg, "--trajectory", str(traj), "--output", str(tmp_path / "v")]) == 0
    rows = (tmp_path / "v" / "ed_check.csv").read_text().splitlines()
    assert rows[0] == "t,ed_geometric,ed_flattened" and len(rows) > 5
    assert main(["fit", "--config", cfg, "--trajectory", str(traj), "--output", str(tmp_path / "f")]) == 0
    assert (tmp_path / "f" / "fit.csv").read_text().startswith("column,model,lambda,r2")


@pytest.mark.parametrize("command", ["extend", "geometry-check", "elliptic-verify", "linstab"])
def test_commands_run(tmp_path, command):
    assert main([command, "--config", _cfg(tmp_path, SMALL), "--output", str(tmp_path / "o")]) == 0
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["command"] == command


def test_repeated_runs_are_byte_identical(tmp_path):
    doc = dict(SMALL, seed=7, verify={"samples": 3}, sweep={"amps": [0.0, 0.8], "omegas": [5.0], "nk": 2, "steps": 100, "nz": 9})
    cfg = _cfg(tmp_path, doc)
    for cmd, name in (("elliptic-verify", "elliptic.csv"), ("sweep", "sweep.csv")):
        a, b = tmp_path / f"{cmd}-a", tmp_path / f"{cmd}-b"
        assert main([cmd, "--config", cfg, "--output", str(a)]) == 0
        assert main([cmd, "--config", cfg, "--output", str(b)]) == 0
        assert (a / name).read_bytes() == (b / name).read_bytes()
