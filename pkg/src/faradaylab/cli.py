"""Command-line entry point.

Usage::

    faradaylab COMMAND [--config FILE] [--output DIR] [--threads N] [--seed N]

Commands: extend, geometry-check, elliptic-verify, linstab, sweep, simulate,
verify-ed, fit.  The JSON config is validated against :data:`SCHEMA`; unknown
keys are rejected with a path-qualified message.  Exit codes: 0 success,
2 invalid configuration, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError, ContractError, FaradayError, NumericalError
from .params import OscillationProfile, Params

COMMANDS = ("extend", "geometry-check", "elliptic-verify", "linstab", "sweep", "simulate", "verify-ed", "fit")

# Defaults (one table):
#   params: L1 = L2 = b = g = mu = sigma = 1, amp = 0, omega = 1
#   profile: cosine with delta = 0, i.e. f(t) = cos(2 pi t)
#   grid: n1 = n2 = 16, nz = 17
NUM = "number"
INT = "integer"
BOOL = "boolean"
STR = "string"
LIST = "list"
SCHEMA = {
    "command": STR,
    "output": STR,
    "seed": INT,
    "threads": INT,
    "params": {k: NUM for k in ("L1", "L2", "b", "g", "mu", "sigma", "amp", "omega")},
    "profile": {"type": STR, "delta": NUM, "cos": LIST, "sin": LIST},
    "grid": {"n1": INT, "n2": INT, "nz": INT},
    "run": {
        "dt": NUM, "t_end": NUM, "stride": INT, "scheme": STR, "eta_modes": LIST, "u_modes": LIST,
        "diagnostics": BOOL, "save_fields": BOOL, "project": BOOL,
    },
    "sweep": {"amps": LIST, "omegas": LIST, "nk": INT, "nz": INT, "steps": INT, "tol": NUM},
    "linstab": {"k": LIST, "nz": INT, "steps": INT},
    "extend": {"eta_modes": LIST},
    "geometry": {"eta_modes": LIST, "levels": LIST},
    "verify": {"samples": INT},
    "trajectory": STR,
    "fit": {"trajectory": STR, "column": STR, "model": STR, "exponent": NUM, "t_min": NUM},
}

GRID_DEFAULTS = {"n1": 16, "n2": 16, "nz": 17}


@dataclass
class CliConfig:
    command: str | None
    params: Params
    grid: dict
    sections: dict = field(default_factory=dict)
    output: str = "faradaylab-out"
    seed: int = 0
    threads: int = 1
    raw: dict = field(default_factory=dict)

    def section(self, name):
        return dict(self.sections.get(name, {}))


def _check_type(v, kind, path):
    ok = {
        NUM: isinstance(v, (int, float)) and not isinstance(v, bool),
        INT: isinstance(v, int) and not isinstance(v, bool),
        BOOL: isinstance(v, bool),
        STR: isinstance(v, str),
        LIST: isinstance(v, list),
    }[kind]
    if not ok:
        raise ConfigurationError(f"expected {kind}, got {type(v).__name__}", path)


def _validate(doc, schema, path=""):
    if not isinstance(doc, dict):
        raise ConfigurationError(f"expected object, got {type(doc).__name__}", path or "<root>")
    for k, v in doc.items():
        p = f"{path}.{k}" if path else k
        if k not in schema:
            raise ConfigurationError("unknown key", p)
        sub = schema[k]
        if isinstance(sub, dict):
            _validate(v, sub, p)
        else:
            _check_type(v, sub, p)


def _profile(doc):
    if not doc:
        return OscillationProfile()
    kind = doc.get("type", "cosine")
    if kind == "cosine":
        if "cos" in doc or "sin" in doc:
            raise ConfigurationError("cosine profile takes only 'delta'", "profile")
        return OscillationProfile.cosine(float(doc.get("delta", 0.0)))
    if kind == "fourier":
        if "delta" in doc:
            raise ConfigurationError("fourier profile takes 'cos' and 'sin'", "profile.delta")
        for key in ("cos", "sin"):
            for i, x in enumerate(doc.get(key, [])):
                _check_type(x, NUM, f"profile.{key}[{i}]")
        return OscillationProfile(tuple(doc.get("cos", (0.0, 1.0))), tuple(doc.get("sin", ())))
    raise ConfigurationError(f"unknown profile type {kind!r}", "profile.type")


def parse_config(text: str) -> CliConfig:
    """Validate a JSON config document and fill in defaults."""
    try:
        doc = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON: {exc}", "<root>") from None
    _validate(doc, SCHEMA)
    prof = _profile(doc.get("profile"))
    params = Params(**doc.get("params", {}), profile=prof)
    grid = dict(GRID_DEFAULTS, **doc.get("grid", {}))
    from .grid import make_grid

    make_grid(params, grid["n1"], grid["n2"], grid["nz"])  # validates sizes
    cmd = doc.get("command")
    if cmd is not None and cmd not in COMMANDS:
        raise ConfigurationError(f"unknown command {cmd!r}", "command")
    threads = doc.get("threads", 1)
    if threads < 1:
        raise ConfigurationError("must be >= 1", "threads")
    sections = {k: v for k, v in doc.items() if isinstance(SCHEMA.get(k), dict) and k not in ("params", "profile", "grid")}
    return CliConfig(cmd, params, grid, sections, doc.get("output", "faradaylab-out"), doc.get("seed", 0), threads, doc)


# ---------------------------------------------------------------------------
# helpers


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def _manifest(out: Path, cfg: CliConfig, started, extra=None):
    from .simulate import params_dict

    m = {
        "command": cfg.command,
        "version": __version__,
        "numpy": np.__version__,
        "python": sys.version.split()[0],
        "params": params_dict(cfg.params),
        "grid": cfg.grid,
        "seed": cfg.seed,
        "threads": cfg.threads,
        "config": cfg.raw,
        "wall_time_s": time.perf_counter() - started,
    }
    if extra:
        m.update(extra)
    (out / "manifest.json").write_text(json.dumps(m, indent=2, sort_keys=True))


def _grid(cfg: CliConfig):
    from .grid import make_grid

    g = cfg.grid
    return make_grid(cfg.params, g["n1"], g["n2"], g["nz"])


def _modes_field(grid, modes):
    from .grid import SurfaceField
    from .simulate import _descriptor_field

    return SurfaceField(grid, _descriptor_field(grid, modes, 1))


def _range(v, path):
    """A list of numbers, validated element by element."""
    for i, x in enumerate(v):
        _check_type(x, NUM, f"{path}[{i}]")
    return np.asarray(v, float)


# ---------------------------------------------------------------------------
# commands


def cmd_extend(cfg, out):
    from .fieldio import field_to_csv
    from .grid import poisson_extend

    g = _grid(cfg)
    modes = cfg.section("extend").get("eta_modes", [{"m1": 1, "re": 1.0}])
    f = _modes_field(g, modes)
    ext = poisson_extend(f, g)
    (out / "extension.csv").write_text(field_to_csv(ext))
    print(f"wrote {out / 'extension.csv'}")
    return {}


def cmd_geometry_check(cfg, out):
    from .geometry import build_geometry, check_piola
    from .grid import make_grid

    sec = cfg.section("geometry")
    modes = sec.get("eta_modes", [{"m1": 1, "re": 0.05}])
    levels = sec.get("levels", [[8, 9], [16, 17], [32, 33]])
    rows = []
    for i, lev in enumerate(levels):
        if not (isinstance(lev, list) and len(lev) == 2):
            raise ConfigurationError("expected [n, nz]", f"geometry.levels[{i}]")
        for x in lev:
            _check_type(x, INT, f"geometry.levels[{i}]")
        n, nz = lev
        g = make_grid(cfg.params, n, n, nz)
        geom = build_geometry(_modes_field(g, modes), None, g)
        kj = float(np.max(np.abs(geom.K * geom.J - 1.0)))
        vol = float(g.integrate_volume(geom.J - 1.0))
        rows.append((n, nz, check_piola(geom), kj, vol))
        print(f"n={n:4d} nz={nz:4d} piola={rows[-1][2]:.3e} |KJ-1|={kj:.3e} int(J-1)={vol:.3e}")
    _write_csv(out / "geometry.csv", ["n", "nz", "piola", "kj_defect", "volume_defect"], rows)
    return {}


def _smooth_volume(g, rng, ncomp, degree=3):
    """Dealiased random data, a cubic in ``x3`` per horizontal mode, so it is resolved exactly."""
    c = rng.standard_normal((ncomp, degree + 1, g.n1, g.n2))
    v = sum(c[:, j][:, None] * (g.z**j)[None, :, None, None] for j in range(degree + 1))
    return g.dealias(v)


def cmd_elliptic_verify(cfg, out):
    from .elliptic import StokesData, solve_capillary, solve_stokes_dirichlet, solve_stokes_stress, stokes_residual
    from .grid import SurfaceField, VolumeField, sobolev_norm_surface

    sec = cfg.section("verify")
    nsamp = sec.get("samples", 20)
    g = _grid(cfg)
    rng = np.random.default_rng(cfg.seed)
    p = cfg.params
    rows = []
    for i in range(nsamp):
        c = (rng.standard_normal((g.n1, g.n2)) + 1j * rng.standard_normal((g.n1, g.n2))) * g.mask
        f = SurfaceField.from_values(g, g.ifft(c))
        psi = solve_capillary(f, p.sigma, p.g)
        res = g.ifft((p.g + p.sigma * g.kmag**2) * psi.coef[0]) - f.scalar
        ratios = [sobolev_norm_surface(psi, s) * p.g / max(sobolev_norm_surface(f, s), 1e-300) for s in (0, 1, 2)]
        # random Stokes data, both variants
        f1 = VolumeField.from_values(g, _smooth_volume(g, rng, 3))
        f2 = VolumeField.from_values(g, _smooth_volume(g, rng, 1)[0])
        f3 = SurfaceField.from_values(g, g.dealias(rng.standard_normal((3, g.n1, g.n2))))
        rs = stokes_residual(*solve_stokes_stress(StokesData(f1, f2, f3), p.mu, g), StokesData(f1, f2, f3), p.mu, "stress")
        # make the Dirichlet data flux compatible
        c3 = np.array(f3.coef)
        c3[2, 0, 0] = np.einsum("z,z->", g.weights, f2.coef[0, :, 0, 0])
        d = StokesData(f1, f2, SurfaceField(g, c3))
        rd = stokes_residual(*solve_stokes_dirichlet(d, p.mu, g), d, p.mu, "dirichlet")
        rows.append((i, float(np.max(np.abs(res))), max(ratios), max(rs.values()), max(rd.values())))
    _write_csv(out / "elliptic.csv", ["sample", "capillary_residual", "max_estimate_ratio", "stress_residual", "dirichlet_residual"], rows)
    worst = np.max(np.array([r[1:] for r in rows]), axis=0)
    print(f"samples={nsamp} capillary residual={worst[0]:.3e} max g||psi||/||f||={worst[1]:.6f} "
          f"stress residual={worst[2]:.3e} dirichlet residual={worst[3]:.3e}")
    return {}


def cmd_linstab(cfg, out):
    from .floquet import monodromy

    sec = cfg.section("linstab")
    k = sec.get("k", [2 * np.pi / cfg.params.L1, 0.0])
    for i, x in enumerate(k):
        _check_type(x, NUM, f"linstab.k[{i}]")
    if len(k) != 2:
        raise ConfigurationError("expected two components", "linstab.k")
    M = monodromy(k, cfg.params, sec.get("nz", 13), steps=sec.get("steps", 200))
    ev = np.linalg.eigvals(M)
    order = np.argsort(-np.abs(ev), kind="stable")
    rows = [(float(ev[j].real), float(ev[j].imag), float(abs(ev[j]))) for j in order]
    _write_csv(out / "multipliers.csv", ["re", "im", "modulus"], rows)
    print(f"k=({k[0]:.6g}, {k[1]:.6g}) dominant multiplier {rows[0][2]:.10f}")
    return {}


def cmd_sweep(cfg, out):
    from .floquet import default_k_samples, stability_sweep

    sec = cfg.section("sweep")
    amps = _range(sec.get("amps", [0.0, 0.5, 1.0]), "sweep.amps")
    omegas = _range(sec.get("omegas", [3.0, 5.0, 8.0]), "sweep.omegas")
    ks = default_k_samples(cfg.params, sec.get("nk", 16))
    smap = stability_sweep(amps, omegas, cfg.params, ks, nz=sec.get("nz", 13), steps=sec.get("steps", 200),
                           threads=cfg.threads, tol=sec.get("tol", 1e-3))
    smap.write_csv(out / "sweep.csv")
    smap.write_matrix(out / "sweep_matrix.csv")
    for r in smap.rows():
        print("amp={:.6g} omega={:.6g} k=({:.4g},{:.4g}) multiplier={:.6f} {}".format(*r))
    return {}


def _run_config(cfg):
    from .simulate import RunConfig

    sec = cfg.section("run")
    g = cfg.grid
    if "eta_modes" not in sec:
        sec["eta_modes"] = [{"m1": 1, "re": 1e-4}]
    return RunConfig(n1=g["n1"], n2=g["n2"], nz=g["nz"], **sec)


def cmd_simulate(cfg, out):
    from .simulate import run

    rc = _run_config(cfg)
    res = run(rc, cfg.params, out)
    last = res.diagnostics[-1] if res.diagnostics else None
    print(f"steps={rc.nsteps} snapshots={len(res.states)}" + (f" final E1={last['E1']:.6e}" if last else ""))
    return {}


def _load_diagnostics(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return [{k: float(v) for k, v in r.items()} for r in rows]


def cmd_verify_ed(cfg, out):
    from .fieldio import read_state
    from .functionals import TrajectoryWindow, ed_residual_flattened, ed_residual_geometric

    traj = cfg.raw.get("trajectory")
    if not traj:
        raise ConfigurationError("a trajectory directory is required", "trajectory")
    tdir = Path(traj)
    if not (tdir / "manifest.json").exists():
        raise ConfigurationError(f"no manifest in {tdir}", "trajectory")
    man = json.loads((tdir / "manifest.json").read_text())
    rows = []
    snaps = man.get("snapshots", [])
    if man["config"]["stride"] == 1 and len(snaps) >= 5:
        states = [read_state(tdir / s["file"]) for s in snaps]
        params = cfg.params
        for c in range(2, len(states) - 2):
            w = TrajectoryWindow(states[c - 2 : c + 3])
            rows.append((w.center.t, ed_residual_geometric(w, params), ed_residual_flattened(w, params)))
    else:
        for r in _load_diagnostics(tdir / "diagnostics.csv"):
            rows.append((r["t"], r["ed_residual"], float("nan")))
    _write_csv(out / "ed_check.csv", ["t", "ed_geometric", "ed_flattened"], rows)
    print(f"{'t':>12} {'geometric':>14} {'flattened':>14}")
    for r in rows:
        print(f"{r[0]:12.6f} {r[1]:14.6e} {r[2]:14.6e}")
    return {}


def cmd_fit(cfg, out):
    from .simulate import fit_algebraic, fit_decay

    sec = cfg.section("fit")
    traj = sec.get("trajectory") or cfg.raw.get("trajectory")
    if not traj:
        raise ConfigurationError("a trajectory directory is required", "fit.trajectory")
    col = sec.get("column", "E1")
    rows = _load_diagnostics(Path(traj) / "diagnostics.csv")
    if rows and col not in rows[0]:
        raise ConfigurationError(f"unknown column {col!r}", "fit.column")
    series = [(r["t"], r[col]) for r in rows if r["t"] >= sec.get("t_min", 0.0)]
    model = sec.get("model", "exp")
    if model == "exp":
        rate, r2 = fit_decay(series)
        label = "lambda"
    elif model == "algebraic":
        rate, r2 = fit_algebraic(series, sec.get("exponent"))
        label = "exponent" if sec.get("exponent") is None else "coefficient"
    else:
        raise ConfigurationError(f"unknown model {model!r}", "fit.model")
    _write_csv(out / "fit.csv", ["column", "model", label, "r2"], [(col, model, rate, r2)])
    print(f"{col}: {label}={rate:.8g} r2={r2:.6f}")
    return {}


HANDLERS = {
    "extend": cmd_extend,
    "geometry-check": cmd_geometry_check,
    "elliptic-verify": cmd_elliptic_verify,
    "linstab": cmd_linstab,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "verify-ed": cmd_verify_ed,
    "fit": cmd_fit,
}


def dispatch(cfg: CliConfig) -> int:
    """Run ``cfg.command``; returns the process exit code."""
    started = time.perf_counter()
    out = Path(cfg.output)
    try:
        if cfg.command not in HANDLERS:
            raise ConfigurationError(f"unknown command {cfg.command!r}", "command")
        out.mkdir(parents=True, exist_ok=True)
        extra = HANDLERS[cfg.command](cfg, out)
        if cfg.command != "simulate":
            _manifest(out, cfg, started, extra)
        return 0
    except (ConfigurationError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except FaradayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="faradaylab", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config file ('-' for stdin)")
    ap.add_argument("--output", help="output directory")
    ap.add_argument("--threads", type=int, help="worker pool size")
    ap.add_argument("--seed", type=int, help="seed for randomised data")
    ap.add_argument("--trajectory", help="trajectory directory (verify-ed, fit)")
    args = ap.parse_args(argv)
    try:
        if args.config == "-":
            text = sys.stdin.read()
        elif args.config:
            text = Path(args.config).read_text(encoding="utf-8")
        else:
            text = "{}"
        doc = json.loads(text) if text.strip() else {}
        if not isinstance(doc, dict):
            raise ConfigurationError("expected object", "<root>")
        doc["command"] = args.command
        for key in ("output", "threads", "seed", "trajectory"):
            v = getattr(args, key)
            if v is not None:
                doc[key] = v
        cfg = parse_config(json.dumps(doc))
    except json.JSONDecodeError as exc:
        print(f"error: <root>: invalid JSON: {exc}", file=sys.stderr)
        return 2
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
