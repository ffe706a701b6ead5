"""
Command-line interface for kgsim.
"""

import argparse
import asyncio
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from .config import config
from .database import RunRegistry
from .errors import ConfigurationError
from .evolver import BLOWN_UP, conservation_drift, evolve
from .experiments import SWEEP_COLUMNS, RunConfig, RunManifest, build_config, parse_values, run_sweep, sweep_grid
from .functionals import standing_wave_values, vakhitov_kolokolov_table
from .ground_state import build_family, resolve_grid
from .linearized import (
    HessianOperator,
    coercivity_margin,
    eigenvalue_relation_residual,
    h1_bootstrap,
    kernel_angle,
    poschl_teller_ground,
    quadratic_form,
    scalar_spectrum,
    spectrum,
    standard_constraints,
)
from .modulation import ModulationTrack, locate_on_orbit
from .persistence import write_csv, write_gnuplot, write_json, write_npz
from .spectral_grid import Grid
from .virial import instability_experiment

EXIT = config.EXIT_CODES

TRACK_COLUMNS = [
    "t", "Q", "P", "E", "orbit_distance",
    "theta", "y", "lambda", "xi_h1l2", "eta_minus_i_omega_xi_l2", "F1", "F2", "F3", "exit_flag",
]
VIRIAL_COLUMNS = [
    "t", "I", "I_dot_numeric", "I_dot_analytic", "tail", "kinetic_term", "distance",
    "y", "lam", "xi_h1l2", "control_lambda_defect", "remainder_ratio", "Q", "P", "E",
]


class KGSimCLI:
    """Command handlers; each returns an exit code and writes its files atomically."""

    def __init__(self, registry: Optional[RunRegistry] = None):
        self._registry = registry

    @property
    def registry(self) -> RunRegistry:
        if self._registry is None:
            self._registry = RunRegistry()
        return self._registry

    def out_dir(self, command: str, cfg: RunConfig) -> Path:
        if cfg.out_dir:
            return Path(cfg.out_dir)
        return Path(config.OUT_DIR) / f"{command}_{cfg.config_hash()[:12]}"

    async def _finish(self, manifest: RunManifest, out: Path, name: str = "manifest.json") -> None:
        await write_json(out / name, manifest)
        await self.registry.record_run(manifest.model_dump(mode="json"), str(out))
        print(f"💾 Outputs written to {out}")

    @staticmethod
    async def _compute(func, *args, **kwargs):
        loop = asyncio.get_running_loop()
        return await loop.run_in_executor(None, lambda: func(*args, **kwargs))

    async def cmd_groundstate(self, cfg: RunConfig, table: bool = False) -> int:
        manifest = RunManifest.start("groundstate", cfg)
        omega = cfg.omega_value
        grid = resolve_grid(cfg.p, omega, Grid(cfg.L, cfg.n))
        wave = build_family(cfg.p, omega, grid)
        values = standing_wave_values(wave)

        out = self.out_dir("groundstate", cfg)
        rows = [
            {"x": x, "phi": phi, "dphi_domega": dphi}
            for x, phi, dphi in zip(grid.x, wave.phi, wave.dphi_domega)
        ]
        await write_csv(out / "profile.csv", rows, ["x", "phi", "dphi_domega"])
        if table:
            omegas = np.linspace(0.0, 0.9, 19)
            vk = await self._compute(vakhitov_kolokolov_table, cfg.p, omegas, Grid(max(cfg.L, 160.0), 2 * cfg.n))
            await write_csv(out / "frequency_table.csv", vk, ["omega", "l2sq", "Q", "E", "S", "dQ_domega", "regime"])

        print(f"\n🌊 Ground state p={cfg.p:g}, omega={omega:.7f} ({values['regime']})")
        print("=" * 50)
        print(f"📊 ||phi||^2 = {values['l2sq']:.10f}   Q = {values['Q']:.10f}   E = {values['E']:.10f}")
        print(f"📊 elliptic residual = {values['elliptic_residual']:.2e}")
        manifest.finish("ok", n=grid.n, L=grid.length, **values)
        await self._finish(manifest, out, "summary.json")
        return EXIT["ok"]

    async def cmd_spectrum(self, cfg: RunConfig, vectors: bool = False, dense_cap: Optional[int] = None) -> int:
        manifest = RunManifest.start("spectrum", cfg)
        omega = cfg.omega_value
        wave = build_family(cfg.p, omega, Grid(cfg.L, cfg.n))
        H = HessianOperator(wave)

        report = await self._compute(spectrum, H, cfg.k, dense_cap)
        margin = await self._compute(coercivity_margin, H, standard_constraints(wave), dense_cap)
        bound = h1_bootstrap(H, margin)
        lam_scalar = float(scalar_spectrum(H, "plus", 1)[0])
        mu = float(report.eigenvalues[0])

        out = self.out_dir("spectrum", cfg)
        await write_csv(
            out / "eigenvalues.csv",
            [{"index": j, "eigenvalue": mu_j} for j, mu_j in enumerate(report.eigenvalues)],
            ["index", "eigenvalue"],
        )
        if vectors:
            rows: List[Dict[str, Any]] = []
            for i, x in enumerate(wave.grid.x):
                row: Dict[str, Any] = {"x": x}
                for j, vec in enumerate(report.eigenvectors):
                    row.update({
                        f"re_f{j}": vec.u[i].real, f"im_f{j}": vec.u[i].imag,
                        f"re_g{j}": vec.v[i].real, f"im_g{j}": vec.v[i].imag,
                    })
                rows.append(row)
            columns = ["x"] + [f"{c}{j}" for j in range(len(report.eigenvectors)) for c in ("re_f", "im_f", "re_g", "im_g")]
            await write_csv(out / "eigenvectors.csv", rows, columns)

        print(f"\n🔬 Hessian spectrum p={cfg.p:g}, omega={omega:.7f}, n={cfg.n}")
        print("=" * 50)
        for j, value in enumerate(report.eigenvalues):
            print(f"{j:2d}. {value: .10f}")
        print(f"📊 negative: {report.n_negative}, near zero: {report.n_near_zero}, coercivity margin: {margin:.6g}")

        manifest.finish(
            "ok",
            eigenvalues=report.eigenvalues,
            n_negative=report.n_negative,
            n_near_zero=report.n_near_zero,
            threshold_zero=report.threshold_zero,
            kernel_angle=kernel_angle(report, wave),
            scalar_ground=lam_scalar,
            scalar_ground_closed_form=poschl_teller_ground(cfg.p, omega),
            eigenvalue_relation_residual=eigenvalue_relation_residual(mu, lam_scalar, omega),
            negative_direction=quadratic_form(H, wave.psi),
            l2sq=wave.l2sq,
            coercivity_margin=margin,
            bootstrap_constant=bound.c_boot,
            bootstrap_kappa=bound.kappa,
        )
        await self._finish(manifest, out)
        return EXIT["ok"]

    async def cmd_evolve(self, cfg: RunConfig, gnuplot: bool = False, snapshots: bool = False) -> int:
        manifest = RunManifest.start("evolve", cfg)
        omega = cfg.omega_value
        grid = resolve_grid(cfg.p, omega, Grid(cfg.L, cfg.n))
        wave = build_family(cfg.p, omega, grid)
        tracker = ModulationTrack(cfg.p, omega)
        rows: List[Dict[str, Any]] = []

        def monitor(s, triple):
            fit = tracker.update(s)
            row = {"t": s.t, "Q": triple.Q, "P": triple.P, "E": triple.E,
                   "orbit_distance": locate_on_orbit(s, wave).distance}
            if fit is not None:
                row.update(fit.as_row())
                row.update(theta=tracker.theta[-1], y=tracker.y[-1], exit_flag=0)
            else:
                row["exit_flag"] = 1
            rows.append(row)

        evolver_cfg = cfg.evolver_config()
        if not snapshots:
            evolver_cfg = replace(evolver_cfg, store_fields=False)
        traj = await self._compute(evolve, wave.perturbed(cfg.a), evolver_cfg, cfg.p, monitor)

        out = self.out_dir("evolve", cfg)
        await write_csv(out / "timeseries.csv", rows, TRACK_COLUMNS)
        if snapshots and traj.samples:
            await write_npz(
                out / "snapshots.npz",
                t=np.array([s.t for s in traj.samples]),
                u=np.array([s.u for s in traj.samples]),
                v=np.array([s.v for s in traj.samples]),
                x=grid.x,
            )
        if gnuplot:
            await write_gnuplot(out / "plot.gp", "timeseries.csv", "t", ["orbit_distance", "lambda", "E"],
                                f"evolve p={cfg.p:g} a={cfg.a:g}")

        drift = conservation_drift(traj)
        print(f"\n⏱️  Evolution p={cfg.p:g}, omega={omega:.7f}, a={cfg.a:g}: {traj.status}")
        print(f"📊 drift Q={drift['Q']:.2e}  P={drift['P']:.2e}  E={drift['E']:.2e}")
        manifest.finish(
            traj.status,
            drift=drift,
            blowup_time=traj.blowup_time,
            modulation_exit_time=tracker.exit_time,
            samples=len(rows),
        )
        await self._finish(manifest, out)
        return EXIT["blowup"] if traj.status == BLOWN_UP else EXIT["ok"]

    async def cmd_instability(self, cfg: RunConfig, gnuplot: bool = False) -> int:
        manifest = RunManifest.start("instability", cfg)
        report = await self._compute(
            instability_experiment,
            cfg.p, cfg.a, cfg.evolver_config(),
            R=cfg.R, omega=cfg.omega_value, length=cfg.L, n=cfg.n,
        )

        out = self.out_dir("instability", cfg)
        await write_csv(out / "timeseries.csv", report.rows(), VIRIAL_COLUMNS)
        if gnuplot:
            await write_gnuplot(out / "plot.gp", "timeseries.csv", "t", ["I", "I_dot_numeric", "distance"],
                                f"instability p={cfg.p:g} a={cfg.a:g}")

        summary = report.summary()
        status = summary.pop("status")
        manifest.finish(status, **summary)
        await self._finish(manifest, out, "report.json")
        if report.t_star is not None:
            print(f"⚠️  t* = {report.t_star:.6g} ({report.exit_reason}), min slope {report.min_slope:.6g}")
        return EXIT["blowup"] if report.exit_reason == "blow_up" else EXIT["ok"]

    async def cmd_sweep(self, cfg: RunConfig, p_values: List[float], ratios: List[float],
                        a_values: List[float], parallelism: int) -> int:
        configs = sweep_grid(cfg, p_values, ratios, a_values)
        for c in configs:
            c.check_for("sweep")
        print(f"🧪 Sweep of {len(configs)} runs, parallelism {parallelism}")
        rows = await run_sweep(configs, parallelism)

        out = Path(cfg.out_dir) if cfg.out_dir else Path(config.OUT_DIR)
        path = await write_csv(out / "sweep_summary.csv", rows, SWEEP_COLUMNS)
        for row in rows:
            print(f"  p={row['p']:g}  a={row['a']:g}  ratio={row.get('omega_ratio', float('nan')):.4f}  → {row['status']}")
        print(f"💾 Summary written to {path}")
        return EXIT["ok"]

    async def cmd_runs(self, limit: int = 20) -> int:
        runs = await self.registry.recent_runs(limit)
        print(f"\n📚 Recent runs ({len(runs)})")
        print("=" * 60)
        for run in runs:
            print(f"{run['id']:4d}  {run['command']:<12} {run['status']:<22} {run['config_hash'][:12]}  {run['finished_at']}")
        return EXIT["ok"]


def _add_run_flags(parser: argparse.ArgumentParser, *names: str) -> None:
    flags = {
        "p": dict(type=float, help="nonlinearity exponent in (1, 5)"),
        "omega": dict(help="frequency, or 'critical' for sqrt((p-1)/4)"),
        "a": dict(type=float, help="perturbation size of the datum (1+a) Phi"),
        "L": dict(type=float, help="domain length"),
        "n": dict(type=int, help="grid nodes (power of two)"),
        "dt": dict(type=float, help="time step"),
        "t_end": dict(type=float, help="final time"),
        "R": dict(type=float, help="virial cutoff radius"),
        "record_every": dict(type=int, help="steps between recorded samples"),
        "k": dict(type=int, help="number of eigenvalues"),
    }
    for name in names:
        option = "--" + name.replace("_", "-")
        parser.add_argument(option, dest=name, default=None, **flags[name])
    parser.add_argument("--out-dir", "--out", dest="out_dir", default=None, help="output directory")
    parser.add_argument("--config", dest="config_file", default=None, help="key=value config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgsim",
        description="kgsim - critical-frequency Klein-Gordon standing-wave laboratory",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  kgsim groundstate --p 3 --omega critical          # profile and scalar diagnostics
  kgsim groundstate --p 3 --table                   # charge/energy along omega
  kgsim spectrum --p 3 --omega critical --k 6       # Hessian eigenvalues
  kgsim evolve --p 3 --a 0.01 --t-end 50            # trajectory with modulation track
  kgsim instability --p 3 --a 0.01 --R 20 --L 100   # virial instability experiment
  kgsim sweep --p-values 3 --ratios 1.0,1.27 --a-values 0.005,0.01
  kgsim runs --limit 10                             # registry of past runs

Exit codes: 0 ok, 2 invalid configuration, 3 blow-up detected, 4 internal error.
        """,
    )
    sub = parser.add_subparsers(dest="command")

    gs = sub.add_parser("groundstate", help="standing-wave profile and identities")
    _add_run_flags(gs, "p", "omega", "L", "n")
    gs.add_argument("--table", action="store_true", help="also tabulate Q, E, dQ/domega over omega")

    sp = sub.add_parser("spectrum", help="Hessian eigenvalues and coercivity margin")
    _add_run_flags(sp, "p", "omega", "L", "n", "k")
    sp.add_argument("--dense-cap", type=int, default=None, help="row cap for dense assembly")
    sp.add_argument("--vectors", action="store_true", help="write eigenvector fields")

    ev = sub.add_parser("evolve", help="evolve (1+a) Phi and track modulation")
    _add_run_flags(ev, "p", "omega", "a", "L", "n", "dt", "t_end", "record_every")
    ev.add_argument("--gnuplot", action="store_true", help="write plot.gp")
    ev.add_argument("--snapshots", action="store_true", help="write field snapshots (npz)")

    ins = sub.add_parser("instability", help="virial instability experiment")
    _add_run_flags(ins, "p", "omega", "a", "L", "n", "dt", "t_end", "R", "record_every")
    ins.add_argument("--gnuplot", action="store_true", help="write plot.gp")

    sw = sub.add_parser("sweep", help="instability experiment over a (p, omega/omega_c, a) grid")
    _add_run_flags(sw, "L", "n", "dt", "t_end", "R", "record_every")
    sw.add_argument("--p-values", default=None, help="comma-separated exponents")
    sw.add_argument("--ratios", default=None, help="comma-separated omega/omega_c")
    sw.add_argument("--a-values", default=None, help="comma-separated perturbations")
    sw.add_argument("--parallelism", type=int, default=None, help="concurrent runs")

    runs = sub.add_parser("runs", help="list recorded runs")
    runs.add_argument("--limit", type=int, default=20)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT["ok"]
    return asyncio.run(run_cli(args))


_RUN_FIELDS = ("p", "omega", "a", "L", "n", "dt", "t_end", "R", "record_every", "k", "out_dir")


async def run_cli(args, cli: Optional[KGSimCLI] = None) -> int:
    """Dispatch one subcommand and map failures to exit codes."""
    cli = cli or KGSimCLI()
    try:
        if args.command == "runs":
            return await cli.cmd_runs(args.limit)

        overrides = {name: getattr(args, name, None) for name in _RUN_FIELDS}
        cfg = build_config(args.config_file, overrides)
        cfg.check_for(args.command, dense_cap=getattr(args, "dense_cap", None))

        if args.command == "groundstate":
            return await cli.cmd_groundstate(cfg, table=args.table)
        if args.command == "spectrum":
            return await cli.cmd_spectrum(cfg, vectors=args.vectors, dense_cap=args.dense_cap)
        if args.command == "evolve":
            return await cli.cmd_evolve(cfg, gnuplot=args.gnuplot, snapshots=args.snapshots)
        if args.command == "instability":
            return await cli.cmd_instability(cfg, gnuplot=args.gnuplot)
        if args.command == "sweep":
            file_values = _sweep_file_values(args.config_file)
            p_values = parse_values(args.p_values or file_values.get("p_values")) or [cfg.p]
            ratios = parse_values(args.ratios or file_values.get("ratios")) or [1.0]
            a_values = parse_values(args.a_values or file_values.get("a_values")) or [cfg.a]
            parallelism = args.parallelism or int(file_values.get("parallelism", config.PARALLELISM))
            return await cli.cmd_sweep(cfg, p_values, ratios, a_values, parallelism)
    except (ConfigurationError, ValidationError, ValueError) as e:
        print(f"❌ Invalid configuration: {e}")
        return EXIT["validation"]
    except Exception as e:
        print(f"❌ {args.command} failed: {type(e).__name__}: {e}")
        return EXIT["internal"]
    print(f"❌ Unknown command {args.command!r}")
    return EXIT["validation"]


def _sweep_file_values(path: Optional[str]) -> Dict[str, str]:
    if not path:
        return {}
    from .experiments import load_config_file

    return load_config_file(path)


if __name__ == "__main__":
    sys.exit(main())
