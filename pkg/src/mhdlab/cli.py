"""Command-line entry point: ``mhdlab {gen,evolve,topo,scenario,verify}``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical
failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import fields as F
from . import io as mio
from . import scenarios as Sc
from . import solver as S
from . import spectral as sp
from . import topology as T
from .errors import CflError, ConfigError, GridError, NumericalError, ResolutionError, VerificationError

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_VERIFY = 0, 2, 3, 4

GEN_KINDS = ("taylor", "beltrami", "v1", "instant2d", "instant3d", "reconnect2d")
SCENARIO_KINDS = ("reconnect2d", "viscous2d", "instant2d", "instant3d")
VERIFY_KINDS = ("energy", "stability", "velocity-decay", "oracle")
ORACLE_TOL = 1e-8
ENERGY_GATE = 1e-4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _say(msg: str):
    print(msg, flush=True)


# --- gen --------------------------------------------------------------------------


def _gen_field(a) -> tuple[sp.SpectralField, sp.SpectralField | None]:
    kind = a.kind
    if kind in ("beltrami", "instant3d"):
        grid = sp.Grid.square(a.modes, 3)
    else:
        grid = sp.Grid.square(a.modes, 2)
    if kind == "taylor":
        b = F.taylor_field(F.TaylorSpec(a.n, a.m, a.family, 1.0 if a.amp is None else a.amp), grid)
    elif kind == "beltrami":
        amp = sp.TWO_PI**-1.5 if a.amp is None else a.amp
        b = F.beltrami_field(F.BeltramiSpec.b0(a.n0, amp), grid)
    elif kind == "v1":
        b = F.stable_taylor_v1(grid, 1.0 if a.amp is None else a.amp)
    elif kind == "instant2d":
        if not 0 <= a.eps < 1:
            raise ConfigError("instant2d needs 0 <= eps < 1")
        b = F.instant2d_datum(grid, a.eps, a.M, a.profile)
    elif kind == "instant3d":
        if not 0 <= a.eps < 1:
            raise ConfigError("instant3d needs 0 <= eps < 1")
        if math.gcd(a.p, a.q) != 1:
            raise ConfigError(f"p={a.p} and q={a.q} must be coprime")
        b = F.instant3d_datum(grid, a.eps, a.M, a.p, a.q)
    else:
        if a.m < 1:
            raise ConfigError("reconnect2d needs m >= 1")
        b, _ = F.reconnection_datum_2d(a.M, a.n, a.m, a.L, a.c, grid, delta=a.delta)
    u = F.random_velocity(a.R, 4, a.seed, grid) if a.R > 0 else None
    return b, u


def cmd_gen(a) -> int:
    try:
        b, u = _gen_field(a)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, (GridError, ResolutionError, ConfigError)):
            raise
        raise ConfigError(str(exc)) from None
    state = S.MhdState(a.time, u if u is not None else sp.zeros(b.grid), b)
    snap = mio.Snapshot.from_state(state, a.nu, a.eta, include_u=u is not None)
    mio.write_snapshot(a.out, snap)
    _say(f"wrote {a.out}: kind={a.kind} modes={'x'.join(map(str, snap.modes))} fields={','.join(snap.data)}")
    return EXIT_OK


# --- evolve -----------------------------------------------------------------------


def _parse_times(text: str | None) -> list[float]:
    if not text:
        return []
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--snapshots expects comma-separated times, got {text!r}") from None


def cmd_evolve(a) -> int:
    cfg = mio.read_config(a.config, S.MhdParams, required=("nu", "eta", "dt", "t_end"))
    try:
        params = S.MhdParams(**cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    snap = mio.read_snapshot(a.input)
    state = snap.state()
    times = _parse_times(a.snapshots)
    if any(t < state.t or t > params.t_end for t in times):
        raise ConfigError(f"snapshot times must lie in [{state.t}, {params.t_end}]")
    run = S.evolve(state, params, times)
    out = Path(a.out_dir)
    include_u = "u" in snap.data or run.final.u.max_abs() > 0
    for i, s in enumerate(run.snapshots):
        mio.write_snapshot(out / f"snap_{i:04d}.snap", mio.Snapshot.from_state(s, params.nu, params.eta, include_u))
    mio.write_norms_csv(a.norms_out or out / "norms.csv", run.norms)
    mio.write_ledger_csv(a.ledger_out or out / "ledger.csv", run.ledger)
    _say(f"evolved to t={run.final.t:.6g} in {run.steps} steps; {len(run.snapshots)} snapshots in {out}")
    return EXIT_OK


# --- topo -------------------------------------------------------------------------


def _field_line_dict(line: T.FieldLine, x0) -> dict:
    return {
        "x0": [float(v) for v in x0],
        "closure": line.closure,
        "winding": None if line.winding is None else [int(v) for v in line.winding],
        "rotation": None if line.rotation is None else [float(v) for v in line.rotation],
        "arclength": float(line.arclength),
    }


def cmd_topo(a) -> int:
    snap = mio.read_snapshot(a.input)
    b = snap.field("b")
    want_cp = a.critical_points or a.separatrices
    if not (want_cp or a.field_lines):
        want_cp = snap.dim == 2
        a.separatrices = snap.dim == 2
        a.field_lines = 0 if snap.dim == 2 else 4
    report: dict = {"dim": snap.dim, "time": snap.time, "modes": list(snap.modes)}
    if want_cp:
        if snap.dim != 2:
            raise ConfigError("critical points and separatrices are computed for 2-D fields only")
        report.update(Sc.report_to_dict(T.topology_report(b, separatrices=a.separatrices)))
    lines = []
    if a.field_lines and b.max_abs() > 0:
        rng = np.random.default_rng(a.seed)
        for x0 in rng.uniform(0.0, sp.TWO_PI, size=(a.field_lines, snap.dim)):
            lines.append(_field_line_dict(T.integrate_field_line(b, x0), x0))
    if a.field_lines:
        report["field_lines"] = lines
    mio.write_report(a.out, report)
    summary = report.get("summary", {"points": "-"})
    _say(f"wrote {a.out}: points={summary.get('points')} field_lines={len(lines)}")
    return EXIT_OK


# --- scenario ---------------------------------------------------------------------


def _scenario_config(a, kind: str, extra: dict | None = None) -> tuple[Sc.ScenarioConfig, dict]:
    raw = mio.read_config(a.config, Sc.ScenarioConfig, extra=extra) if a.config else {}
    extras = {k: raw.pop(k) for k in list(raw) if extra and k in extra}
    if "kind" in raw and raw["kind"] != kind:
        raise ConfigError(f"config kind {raw['kind']!r} does not match command kind {kind!r}")
    raw["kind"] = kind
    if a.seed is not None:
        raw["seed"] = a.seed
    return Sc.ScenarioConfig(**raw), extras


def cmd_scenario(a) -> int:
    cfg, _ = _scenario_config(a, a.kind)
    result = Sc.run_scenario(cfg)
    report = result.to_dict()
    mio.write_report(a.out, report)
    if a.kind in ("reconnect2d", "viscous2d"):
        _say(f"{a.kind}: reconnected={report['reconnected']} ({report.get('message', '')})")
    elif a.kind == "instant2d":
        _say(f"instant2d: break rate {report['hamiltonian_rate']:.6e} "
             f"(stated {report['stated_rate']:.6e}, corrected {report['corrected_rate']:.6e})")
    else:
        _say(f"instant3d: formula error {report['formula_error']:.3e}")
    return EXIT_OK


# --- verify -----------------------------------------------------------------------


def _oracle_from_snapshots(final: mio.Snapshot, initial: mio.Snapshot) -> float:
    """Sup error of ``final`` against the heat flow of ``initial``."""
    if final.modes != initial.modes:
        raise ConfigError("snapshots live on different grids")
    t = final.time - initial.time
    s0, s1 = initial.state(), final.state()
    err = 0.0
    scale = max(s0.u.max_abs(), s0.b.max_abs(), 1e-300)
    for name, coef in (("u", final.nu), ("b", final.eta)):
        exact = sp.heat_evolve(getattr(s0, name), coef, t)
        err = max(err, (getattr(s1, name) - exact).max_abs() / scale)
    return err


def _oracle_run(cfg: Sc.ScenarioConfig) -> float:
    n, m = (cfg.n or 2), (cfg.m or 2)
    grid = sp.Grid.square(cfg.resolution or 32)
    V = F.taylor_field(F.TaylorSpec(n, m, 1, cfg.M), grid)
    params = S.MhdParams(cfg.nu, cfg.eta, cfg.dt, cfg.T, integrator=cfg.integrator)
    run = S.evolve(S.MhdState.magnetic_only(V), params)
    exact = V * math.exp(-cfg.eta * (n * n + m * m) * cfg.T)
    return (run.final.b - exact).max_abs() / V.max_abs()


def cmd_verify(a) -> int:
    report: dict
    if a.what == "oracle":
        if a.input:
            if not a.reference:
                raise ConfigError("verify oracle --in needs --reference (the initial snapshot)")
            err = _oracle_from_snapshots(mio.read_snapshot(a.input), mio.read_snapshot(a.reference))
        else:
            cfg, _ = _scenario_config(a, "energy")
            err = _oracle_run(cfg)
        ok = err <= ORACLE_TOL
        report = {"name": "oracle", "error": err, "tolerance": ORACLE_TOL, "passed": ok}
        _say(f"oracle: relative sup error {err:.3e} (tolerance {ORACLE_TOL:g})")
    elif a.what == "energy" and a.input:
        ledger = mio.read_ledger_csv(a.input)
        res = S.energy_identity_residual(ledger)
        rel = res.max / max(ledger.energy[0], 1e-300) if ledger.energy[0] > 0 else res.max
        ok = rel <= ENERGY_GATE and ledger.is_monotone()
        report = {"name": "energy", "max_residual": res.max, "relative": rel, "gate": ENERGY_GATE,
                  "monotone": ledger.is_monotone(), "passed": ok}
        _say(f"energy: max residual {res.max:.3e} = {rel:.3e} E(0) (gate {ENERGY_GATE:g} E(0))")
    else:
        if a.what == "energy":
            cfg, _ = _scenario_config(a, "energy")
            est = Sc.verify_energy_and_hr(cfg)
        elif a.what == "stability":
            extra = {"perturbation": float, "dim": int}
            raw = mio.read_config(a.config, Sc.ScenarioConfig, extra=extra) if a.config else {}
            dim = raw.get("dim", 2)
            if dim not in (2, 3):
                raise ConfigError("dim must be 2 or 3")
            cfg, extras = _scenario_config(a, f"stability{dim}d", extra)
            est = Sc.verify_stability_decay(cfg, dim, perturbation=extras.get("perturbation", 1e-6))
        else:
            cfg, _ = _scenario_config(a, "velocity")
            est = Sc.verify_velocity_decay(cfg)
        report = est.to_dict()
        report.pop("series", None)
        ok = est.passed
        failed = [k for k, v in est.passes.items() if not v]
        _say(f"{a.what}: {'pass' if ok else 'FAIL'}" + (f" (failed: {', '.join(failed)})" if failed else ""))
    if a.out:
        mio.write_report(a.out, report)
    return EXIT_OK if ok else EXIT_VERIFY


# --- wiring -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mhdlab", description="Spectral MHD on the torus and magnetic topology.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write an initial-datum snapshot")
    g.add_argument("--kind", required=True, choices=GEN_KINDS)
    g.add_argument("--out", required=True)
    g.add_argument("--modes", type=int, default=64)
    g.add_argument("--amp", type=float, default=None)
    g.add_argument("--n", type=int, default=1)
    g.add_argument("--m", type=int, default=1)
    g.add_argument("--family", type=int, default=1)
    g.add_argument("--n0", type=int, default=1, help="Beltrami frequency")
    g.add_argument("--M", type=float, default=1.0)
    g.add_argument("--L", type=int, default=2)
    g.add_argument("--c", type=float, default=0.1)
    g.add_argument("--delta", type=float, default=None)
    g.add_argument("--eps", type=float, default=0.1)
    g.add_argument("--p", type=int, default=1)
    g.add_argument("--q", type=int, default=1)
    g.add_argument("--profile", choices=("periodic", "linear"), default="periodic")
    g.add_argument("--R", type=float, default=0.0, help="add a random velocity with H^4 norm R")
    g.add_argument("--nu", type=float, default=1.0)
    g.add_argument("--eta", type=float, default=1.0)
    g.add_argument("--time", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("evolve", help="integrate a snapshot forward")
    e.add_argument("--in", dest="input", required=True)
    e.add_argument("--config", required=True)
    e.add_argument("--snapshots", default=None, help="comma-separated output times")
    e.add_argument("--out-dir", default=".")
    e.add_argument("--norms-out", default=None)
    e.add_argument("--ledger-out", default=None)
    e.add_argument("--seed", type=int, default=None)
    e.set_defaults(func=cmd_evolve)

    t = sub.add_parser("topo", help="topology report of a snapshot's magnetic field")
    t.add_argument("--in", dest="input", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--critical-points", action="store_true")
    t.add_argument("--separatrices", action="store_true")
    t.add_argument("--field-lines", type=int, default=0)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_topo)

    s = sub.add_parser("scenario", help="run a reconnection scenario")
    s.add_argument("kind", choices=SCENARIO_KINDS)
    s.add_argument("--config", default=None)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(func=cmd_scenario)

    v = sub.add_parser("verify", help="run an estimate suite or oracle check")
    v.add_argument("what", choices=VERIFY_KINDS)
    v.add_argument("--config", default=None)
    v.add_argument("--in", dest="input", default=None)
    v.add_argument("--reference", default=None)
    v.add_argument("--out", default=None)
    v.add_argument("--seed", type=int, default=None)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (ConfigError, GridError, ResolutionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, CflError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except VerificationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
