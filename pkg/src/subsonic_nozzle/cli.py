"""Command-line driver: ``subsonic-nozzle <command> --config run.toml``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, RunConfig, load_config
from .critical import find_critical, is_monotone, sweep
from .diagnostics import verify
from .elliptic import SolverError
from .euler import solve_euler, solve_potential
from .gas import GasDomainError
from .io import write_fields

log = logging.getLogger("subsonic_nozzle")

COMMANDS = ("solve-potential", "solve-euler", "sweep", "critical", "verify")


def _need_flux(cfg: RunConfig):
    if cfg.mass_flux is None:
        raise ConfigError(["flow.mass_flux: required for this command"])
    return cfg.mass_flux


def _potential(cfg):
    return solve_potential(cfg.gas, cfg.geometry, cfg.grid, cfg.Bbar, _need_flux(cfg),
                           cfg.solver, cfg.theta0_frac)


def _euler(cfg):
    return solve_euler(cfg.gas, cfg.geometry, cfg.grid, cfg.B0, _need_flux(cfg), cfg.fixedpoint,
                       cfg.solver, cfg.Bbar, cfg.theta0_frac, eps_warn=cfg.eps_warn)


def _report_and_write(cfg, sol, out, command):
    report = verify(cfg.gas, cfg.geometry, sol, cfg.solver)
    meta = {"command": command, "config_sha256": cfg.sha256}
    write_fields(sol, out, report=report, meta=meta)
    for line in report.to_lines():
        print(line)
    return report.passed


def cmd_solve_potential(cfg, out, threads):
    return _report_and_write(cfg, _potential(cfg), out, "solve-potential")


def cmd_solve_euler(cfg, out, threads):
    sol = _euler(cfg)
    print(f"T_iterations={sol.T_iterations}")
    print(f"T_residual={sol.T_residual!r}")
    return _report_and_write(cfg, sol, out, "solve-euler") and sol.converged


def cmd_verify(cfg, out, threads):
    sol = _potential(cfg) if cfg.B0.is_constant else _euler(cfg)
    return _report_and_write(cfg, sol, out, "verify")


def _write_records(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("m,max_mach,margin,converged,near_sonic\n")
        for r in records:
            fh.write(f"{r.m!r},{r.max_mach!r},{r.margin!r},{str(r.converged).lower()},"
                     f"{str(r.near_sonic).lower()}\n")


def cmd_sweep(cfg, out, threads):
    if cfg.sweep_values is None:
        raise ConfigError(["[sweep]: m_values or m_min/m_max/count required for this command"])
    records = sweep(cfg.gas, cfg.geometry, cfg.grid, cfg.Bbar, cfg.sweep_values, cfg.solver,
                    cfg.theta0_frac, threads=threads)
    _write_records(out, records)
    for r in records:
        print(f"m={r.m!r} max_mach={r.max_mach!r} margin={r.margin!r} subsonic={r.subsonic}")
    monotone = is_monotone(records)
    print(f"monotone={str(monotone).lower()}")
    return monotone and all(r.subsonic for r in records)


def cmd_critical(cfg, out, threads):
    res = find_critical(cfg.gas, cfg.geometry, cfg.grid, cfg.Bbar, cfg.critical, cfg.solver,
                        cfg.theta0_frac)
    _write_records(out, res.probes)
    print(f"m_lo={res.m_lo!r}")
    print(f"m_hi={res.m_hi!r}")
    print(f"relative_width={res.relative_width!r}")
    print(f"max_mach={res.sequence[-1].max_mach!r}")
    print(f"reached_target={str(res.reached_target).lower()}")
    return res.relative_width <= cfg.critical.bracket_tol and is_monotone(res.sequence)


_HANDLERS = {
    "solve-potential": cmd_solve_potential,
    "solve-euler": cmd_solve_euler,
    "sweep": cmd_sweep,
    "critical": cmd_critical,
    "verify": cmd_verify,
}


def build_parser():
    p = argparse.ArgumentParser(prog="subsonic-nozzle",
                                description="Subsonic Euler flow in periodic 2-D nozzles.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="TOML run configuration")
        s.add_argument("--out", help="output path (default: output.path from the config)")
        s.add_argument("--threads", type=int, default=1, help="concurrent solves in a sweep")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        out = args.out or cfg.output_path
        ok = _HANDLERS[args.command](cfg, out, args.threads)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return 2
    except (SolverError, GasDomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0 if ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
