"""Command-line entry point: ``fkripple <command> --config FILE [options]``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import atomistic, geometry, hull, potential, relax, twistmap
from .config import Config, ConfigError, dump, load_config
from .fkmodel import SupercellState, check_conditions
from .output import write_csv, write_json, write_manifest

logger = logging.getLogger("fkripple")

COMMANDS = ("table", "relax", "hull", "converge", "reconstruct", "orbit", "atomistic", "disregistry", "check")


class CommandError(RuntimeError):
    pass


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fkripple", description="Double-chain rippling model tools.")
    ap.add_argument("command", choices=COMMANDS, metavar="command", help=" | ".join(COMMANDS))
    ap.add_argument("--config", required=True, help="INI configuration file")
    ap.add_argument("--out", help="output directory (overrides io.out)")
    ap.add_argument("--beta", type=float, help="override model.beta")
    ap.add_argument("--p", type=int, help="override solver.p")
    ap.add_argument("--q", type=int, help="override solver.q")
    ap.add_argument("--qmax", type=int, help="override solver.q_max")
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="parallel study rows")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _apply_overrides(cfg: Config, args) -> Config:
    if args.beta is not None:
        cfg = cfg.with_beta(args.beta)
    solver = cfg.solver
    for key, val in (("p", args.p), ("q", args.q), ("q_max", args.qmax)):
        if val is not None:
            if val < 1:
                raise ConfigError(f"--{key.replace('_', '')} must be >= 1")
            solver = replace(solver, **{key: val})
    io = cfg.io if args.out is None else replace(cfg.io, out=args.out)
    return replace(cfg, solver=solver, io=io)


def get_table(cfg: Config) -> potential.TabulatedPotential:
    t = cfg.table
    params = cfg.model
    if t.path and Path(t.path).is_file():
        return potential.TabulatedPotential.load(t.path, params)
    return potential.tabulate(params, n_s=t.n_s, n_kappa=t.n_kappa, kappa_max=t.h_kappa_max / params.h)


def _relax_kw(cfg: Config) -> dict:
    s = cfg.solver
    return dict(tol=s.tol, max_iter=s.max_iter or None, memory=s.memory, symmetrized=s.symmetrized)


def _relaxed(cfg: Config, table, p: int, q: int):
    res = relax.relax_approximant(p, q, table, **_relax_kw(cfg))
    res.state.params = cfg.model
    if not res.converged:
        logger.warning("(%d, %d) did not converge: %s", p, q, res.message)
    return res


def _nearest_p(cfg: Config, q: int) -> int:
    return int(round(cfg.model.alpha.exact() * q))


def cmd_table(cfg, out):
    table = get_table(cfg)
    path = out / "table.txt"
    table.save(path)
    return [path]


def cmd_relax(cfg, out):
    table = get_table(cfg)
    res = _relaxed(cfg, table, cfg.solver.p, cfg.solver.q)
    state_path = out / "state.txt"
    res.state.save(state_path, cfg.model)
    summary = res.summary()
    summary["staggered_fraction"] = hull.staggered_fraction(res.state)
    return [state_path], summary


def cmd_hull(cfg, out):
    table = get_table(cfg)
    res = _relaxed(cfg, table, cfg.solver.p, cfg.solver.q)
    f = hull.build_hull(res.state)
    path = write_csv(out / "hull.csv", ("x", "F", "g"), zip(f.x, f.values, f.values - f.x))
    summary = res.summary()
    summary.update(monotone=f.monotone, max_slope=f.max_slope(),
                   plateau_fraction=hull.plateau_fraction(res.state),
                   staggered_fraction=hull.staggered_fraction(res.state))
    return [path], summary


def cmd_converge(cfg, out, jobs):
    table = get_table(cfg)
    qr = cfg.solver.reference_q
    ref = _relaxed(cfg, table, _nearest_p(cfg, qr), qr)
    ref_hull = hull.build_hull(ref.state)
    pairs = relax.approximants(cfg.model.alpha, cfg.solver.q_max)
    rows = hull.convergence_study(table, pairs, ref_hull, jobs=jobs, **_relax_kw(cfg))
    path = write_csv(out / "converge.csv", hull.StudyRow.HEADER, (r.astuple() for r in rows))
    summary = {
        "rows": len(rows),
        "converged_rows": sum(r.converged for r in rows),
        "reference_p": ref.state.p,
        "reference_q": qr,
        "reference_converged": ref.converged,
    }
    try:
        summary["loglog_slope"] = hull.loglog_slope(rows)
    except ValueError:
        summary["loglog_slope"] = None
    return [path], summary


def cmd_reconstruct(cfg, out):
    table = get_table(cfg)
    res = _relaxed(cfg, table, cfg.solver.p, cfg.solver.q)
    curves = geometry.reconstruct_curves(res.state, cfg.model)
    path = write_csv(out / "curves.csv", ("chain_id", "atom_index", "x", "y"), curves.rows())
    summary = {
        "p": res.state.p,
        "q": res.state.q,
        "dominant_wavelength": geometry.dominant_wavelength(curves.curve),
        "closure_offset_x": float(curves.closure_offset[0]),
        "closure_offset_y": float(curves.closure_offset[1]),
        "closure_angle": curves.closure_angle,
    }
    return [path], summary


def cmd_orbit(cfg, out):
    table = get_table(cfg)
    sym = cfg.solver.symmetrized
    res = _relaxed(cfg, table, cfg.solver.p, cfg.solver.q)
    q = res.state.q
    n = cfg.solver.orbit_steps or 10 * q
    pt0 = twistmap.start_from_state(res.state, table, sym)
    orb = twistmap.orbit(pt0, n, table, sym)
    path = write_csv(out / "orbit.csv", ("j", "theta", "p", "s_lift"), orb.rows())
    summary = {"p": res.state.p, "q": q, "steps": n,
               "equilibrium_defect": twistmap.equilibrium_defect(orb, table, sym),
               "area_defect_start": twistmap.area_preservation_check(pt0, table, symmetrized=sym)}
    if n > q:
        dist, j = twistmap.recurrence_indicator(orb, q)
        summary.update(recurrence=dist, recurrence_index=j)
    return [path], summary


def _atomistic_system(cfg):
    a = cfg.atomistic
    c1 = atomistic.ChainConstants(a.l1, a.k1, a.k_theta1)
    c2 = atomistic.ChainConstants(a.cell_length / a.n2, a.k2, a.k_theta2)
    return atomistic.build_system(a.n1, a.n2, a.cell_length, a.separation, (c1, c2), a.eps, a.sigma, a.cutoff)


def cmd_atomistic(cfg, out):
    a = cfg.atomistic
    sys0 = _atomistic_system(cfg)
    res = atomistic.relax_system(sys0, tol=a.tol, max_iter=a.max_iter, memory=a.memory)
    p0, p1 = out / "initial_snapshot.txt", out / "relaxed_snapshot.txt"
    sys0.save(p0)
    res.system.save(p1)
    if not res.converged:
        logger.warning("atomistic relaxation did not converge: %s", res.message)
    return [p0, p1], res.summary()


def load_snapshot(path, cfg) -> atomistic.AtomisticSystem:
    """Positions and cell length from a snapshot; constants from the configuration."""
    path = Path(path)
    if not path.is_file():
        raise CommandError(f"snapshot not found: {path}")
    L = None
    rows = []
    for line in path.read_text().splitlines():
        if line.startswith("# L ="):
            L = float(line.split("=")[1])
        elif line and not line.startswith("#") and not line.startswith("chain_id"):
            rows.append([float(v) for v in line.split(",")])
    if L is None or not rows:
        raise CommandError(f"malformed snapshot: {path}")
    data = np.array(rows)
    base = _atomistic_system(cfg)
    r1 = data[data[:, 0] == 1][:, 2:]
    r2 = data[data[:, 0] == 2][:, 2:]
    return replace(base, r1=r1, r2=r2, L=L)


def chain_disregistry(system: atomistic.AtomisticSystem):
    """Disregistry of chain-2 atoms measured along chain 1 (with one image on each side)."""
    shift = np.array([system.L, 0.0])
    bottom = np.vstack([system.r1 - shift, system.r1, system.r1 + shift])
    return geometry.project_onto_polyline(system.r2, bottom), geometry.disregistry(bottom, system.r2, system.c1.l)


def cmd_disregistry(cfg, out):
    if cfg.io.snapshot:
        system = load_snapshot(cfg.io.snapshot, cfg)
    else:
        a = cfg.atomistic
        system = atomistic.relax_system(_atomistic_system(cfg), tol=a.tol, max_iter=a.max_iter, memory=a.memory).system
    (arcs, _, _), delta = chain_disregistry(system)
    path = write_csv(out / "disregistry.csv", ("atom_index", "arc_position", "delta"),
                     zip(range(len(delta)), arcs, delta))
    hist, edges = np.histogram(delta, bins=20, range=(0.0, system.c1.l))
    k = int(np.argmax(hist))
    return [path], {"atoms": len(delta), "mode": 0.5 * (edges[k] + edges[k + 1]), "mean": float(np.mean(delta))}


def cmd_check(cfg, out):
    table = get_table(cfg)
    rep = check_conditions(table, symmetrized=cfg.solver.symmetrized)
    return [], rep.as_dict()


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and not argv[0].startswith("-") and argv[0] not in COMMANDS:
        print(f"fkripple: unknown command {argv[0]!r}", file=sys.stderr)
        return 2
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    t0 = time.perf_counter()
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        out = Path(cfg.io.out)
        out.mkdir(parents=True, exist_ok=True)
        handler = globals()[f"cmd_{args.command}"]
        result = handler(cfg, out, args.jobs) if args.command == "converge" else handler(cfg, out)
        outputs, summary = result if isinstance(result, tuple) else (result, None)
        wall = time.perf_counter() - t0
        if summary is not None:
            summary = dict(summary, wall_time=wall)
            outputs = outputs + [write_json(out / f"{args.command}.summary.json", summary)]
        write_manifest(out, args.command, args.config, dump(cfg), outputs, wall)
    except (ConfigError, CommandError, ValueError, RuntimeError, OSError) as exc:
        print(f"fkripple {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
