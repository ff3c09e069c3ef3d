"""Command-line front end.

Every command reads a JSON config (the packaged default when ``--config`` is
omitted), writes CSV outputs plus a plotting script into ``--out`` and
finishes with a manifest of checksums. ``topofreq replay <manifest>`` reruns a
manifest and checks that every output is reproduced bit for bit.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 capability error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import bhz, config, floquet_lattice, io, noise, qubit_array, tomography
from .drive import DriveParams, PhysicalUnits, lab_frame_field, virtual_z_phase
from .errors import CapabilityError, ConfigError, InvalidArgumentError, TopofreqError
from .observables import chern_from_work, work_series
from .propagator import evolve, evolve_field, initial_state
from .spin import bloch_of_many

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CAPABILITY = 0, 2, 3, 4


def make_drive(block: dict | None, **extra) -> DriveParams:
    block = dict(block or {})
    block.update(extra)
    preset = block.pop("preset", "experiment")
    try:
        if preset == "experiment":
            return DriveParams.experiment(**block)
        return DriveParams(**block)
    except InvalidArgumentError as exc:
        raise ConfigError(f"drive: {exc}") from exc


class Run:
    """Output directory bookkeeping for one command."""

    def __init__(self, command: str, cfg: dict, out: Path):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.outputs: list[Path] = []
        self.extra: dict = {}
        self.started = datetime.now(timezone.utc)
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        p = self.out / name
        self.outputs.append(p)
        return p

    @property
    def units(self) -> PhysicalUnits | None:
        return PhysicalUnits() if self.cfg.get("units") == "physical" else None

    def time_axis(self, t):
        u = self.units
        return (np.asarray(t), "t") if u is None else (u.to_seconds(t), "t_seconds")

    def finish(self) -> Path:
        return io.write_manifest(self.out, io.build_manifest(self.command, self.cfg, self.outputs, self.started, self.extra))


def cmd_simulate(run: Run) -> None:
    cfg = run.cfg
    p = make_drive(cfg["drive"])
    n_samples = cfg.get("n_samples", 800)
    band = cfg.get("band", "upper")
    traj = evolve(p, n_samples=n_samples, sampling=cfg.get("sampling", "midpoint"), band=band)
    rec = work_series(traj, cfg.get("fit_window", "exclude_transient"))
    c, ci = chern_from_work(rec, p)
    t, label = run.time_axis(traj.times)
    io.write_csv(run.path("trajectory.csv"), [label, "sx", "sy", "sz"], ([a, *s] for a, s in zip(t, traj.states)))
    io.write_csv(run.path("work.csv"), [label, "W1", "W2"], zip(t, rec.W1, rec.W2))
    summary = {**rec.fit_summary(), "C_est": c, "ci95": ci, "dt": traj.meta["dt"], "params": p.to_dict()}
    io.write_json(run.path("fit_summary.json"), summary)
    io.write_plot_script(run.path("plot_trajectory.py"), "trajectory.csv", label, ["sx", "sy", "sz"], "Bloch components")

    tomo = cfg.get("tomography")
    if tomo:
        rng = np.random.default_rng(cfg.get("seed", 0))
        if tomo.get("frame", "lab") == "lab":
            times, spinors, _ = evolve_field(
                lambda s: lab_frame_field(p, s), p.t_total, initial_state(p, band), p.step, n_samples, "cf4"
            )
            measured = bloch_of_many(spinors)
            phases = virtual_z_phase(p, times)
        else:
            measured, phases = traj.states, np.zeros(len(traj))
        raws, blochs, purities, fids = [], [], [], []
        for b, phi, truth in zip(measured, phases, traj.states):
            rec_shots = tomography.sample_shots(b / np.linalg.norm(b), tomo["shots"], rng)
            est = tomography.DensityEstimate.from_shots(rec_shots, phi)
            raws.append(est.raw)
            blochs.append(est.bloch)
            purities.append(est.purity)
            fids.append(float(tomography.fidelity(est.bloch, truth)))
        tomography.tomography_to_csv(run.path("tomography.csv"), t, raws, blochs, purities, fids)
        run.extra["mean_fidelity"] = float(np.mean(fids))
    run.extra["C_est"] = c


def _sweep_point(p: DriveParams, cfg: dict, M: float, seed: int, out: Path, threads: int):
    row = {"M": M, "C_est": np.nan, "ci95": np.nan, "C_bhz": np.nan, "mc_mean": np.nan, "mc_std": np.nan}
    errors = []
    try:
        row["C_bhz"] = bhz.chern_number(bhz.BhzParams(M), cfg.get("bhz_grid", 32))
    except TopofreqError as exc:
        errors.append(f"bhz: {exc}")
    work_path = None
    try:
        q = p.replace(M=M)
        traj = evolve(q, n_samples=cfg.get("n_samples", 800))
        rec = work_series(traj, cfg.get("fit_window", "exclude_transient"))
        row["C_est"], row["ci95"] = chern_from_work(rec, q)
        work_path = out / f"work_M{M:g}.csv"
        io.write_csv(work_path, ["t", "W1", "W2"], zip(traj.times, rec.W1, rec.W2))
        nz = cfg.get("noise")
        if nz:
            mc = noise.mc_chern(
                q, noise.HeuristicNoiseParams(nz["beta"], seed), nz["realizations"], threads=threads,
                window=cfg.get("fit_window", "exclude_transient"), clean=traj,
            )
            row["mc_mean"], row["mc_std"] = mc.mean, mc.std
    except TopofreqError as exc:
        errors.append(f"dynamics: {exc}")
    return row, work_path, errors


def cmd_chern_sweep(run: Run) -> None:
    cfg = run.cfg
    p = make_drive(cfg.get("drive"), M=cfg["M_values"][0])
    seed = cfg.get("seed", 0)
    threads = cfg.get("threads", 1)
    Ms = [float(m) for m in cfg["M_values"]]

    def point(M):
        return _sweep_point(p, cfg, M, seed, run.out, 1)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(point, Ms))
    else:
        results = [point(M) for M in Ms]
    cols = ["M", "C_est", "ci95", "C_bhz", "mc_mean", "mc_std"]
    failures = {}
    for M, (_, path, errs) in zip(Ms, results):
        if path is not None:
            run.outputs.append(path)
        if errs:
            failures[f"{M:g}"] = errs
    io.write_csv(run.path("summary.csv"), cols, ([r[c] for c in cols] for r, _, _ in results))
    io.write_plot_script(run.path("plot_chern.py"), "summary.csv", "M", ["C_est", "C_bhz", "mc_mean"], "Chern number vs M")
    run.extra["failures"] = failures


def cmd_bhz(run: Run) -> None:
    cfg = run.cfg
    try:
        p = bhz.BhzParams(cfg["M"], cfg.get("B", 1.0))
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from exc
    c = bhz.chern_number(p, cfg.get("grid_n", 32))
    wd = bhz.winding_diagnostic(p)
    bhz.curvature_to_csv(p, run.path("curvature.csv"), cfg.get("curvature_grid", 64))
    io.write_json(
        run.path("chern.json"),
        {"M": p.M, "B": p.B, "chern": c, "curvature_integral": bhz.curvature_integral(p),
         "hz_range": [wd.zmin, wd.zmax], "origin_enclosed": wd.origin_enclosed, "min_gap": bhz.min_gap(p)},
    )
    run.extra["chern"] = c


def cmd_floquet(run: Run) -> None:
    cfg = run.cfg
    p = make_drive(cfg["drive"])
    tol = cfg.get("tolerance", 1e-10)
    op = floquet_lattice.build_operator(p, floquet_lattice.Truncation(cfg.get("radius", 6)))
    evals = op.spectrum()
    floquet_lattice.spectrum_to_csv(evals, run.path("spectrum.csv"))
    rng = np.random.default_rng(cfg.get("seed", 0))
    worst = 0.0
    rows = []
    for _ in range(cfg.get("band_checks", 50)):
        kx, ky = rng.uniform(-np.pi, np.pi, 2)
        lo, hi = floquet_lattice.zero_field_bands(p, kx, ky)
        blo, bhi = bhz.bands(bhz.BhzParams(p.M), kx + p.phi1, ky + p.phi2)
        err = max(abs(lo - p.eta * blo), abs(hi - p.eta * bhi))
        worst = max(worst, err)
        rows.append((kx, ky, lo, hi, err))
    io.write_csv(run.path("band_check.csv"), ["kx", "ky", "E_lower", "E_upper", "error"], rows)
    run.extra.update(band_check_max_error=worst, hermiticity_residual=op.hermiticity_residual())
    if worst > tol:
        raise TopofreqError(f"zero-tilt bands differ from BHZ bands by {worst:.3g} > {tol:g}")


def cmd_array(run: Run) -> None:
    cfg = run.cfg
    lat = cfg["lattice"]
    n = lat.get("n_qubits")
    if isinstance(n, int) and n > qubit_array.MAX_QUBITS:
        raise CapabilityError(f"dense evolution supports at most {qubit_array.MAX_QUBITS} qubits, got {n}")
    H = qubit_array.hamiltonian_from_dict(lat)
    psi0 = np.zeros(H.spec.dimension, dtype=complex)
    idx = cfg.get("initial_basis_state", 0)
    if idx >= psi0.size:
        raise ConfigError(f"initial_basis_state {idx} out of range for {n} qubits")
    psi0[idx] = 1.0
    tr = qubit_array.evolve_array(H, psi0, cfg["t_total"], cfg["dt"], cfg.get("n_samples"), cfg.get("cache_tol"))
    zs = [tr.expectation(qubit_array.pauli_string(H.spec.n_qubits, {i: "Z"})) for i in range(H.spec.n_qubits)]
    norms = np.linalg.norm(tr.states, axis=1)
    t, label = run.time_axis(tr.times)
    header = [label] + [f"z{i}" for i in range(H.spec.n_qubits)] + ["z_total", "norm"]
    io.write_csv(run.path("array_trajectory.csv"), header,
                 ([a, *(z[k] for z in zs), sum(z[k] for z in zs), norms[k]] for k, a in enumerate(t)))
    io.write_plot_script(run.path("plot_array.py"), "array_trajectory.csv", label,
                         [f"z{i}" for i in range(H.spec.n_qubits)], "Site magnetisation")
    run.extra["evolution"] = tr.meta


def cmd_noise_mc(run: Run) -> None:
    cfg = run.cfg
    seed = cfg.get("seed", 0)
    p = make_drive(cfg["drive"])
    h = cfg["heuristic"]
    mc = noise.mc_chern(p, noise.HeuristicNoiseParams(h["beta"], seed), h["realizations"],
                        threads=cfg.get("threads", 1), n_samples=cfg.get("n_samples", 800),
                        window=cfg.get("fit_window", "exclude_transient"))
    mc.to_csv(run.path("mc_samples.csv"))
    summary = mc.summary() | {"clean_C": mc.clean, "failures": mc.failures}
    g = cfg.get("gaussian")
    if g:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 2**32]))
        b = np.array([0.0, 0.0, 1.0])
        draws = noise.gaussian_measure_many(b, noise.GaussianNoiseParams(g["sigma_noise"], seed), rng, g["draws"])
        loss = 1.0 - tomography.fidelity(draws, b)
        summary["gaussian"] = {"sigma_noise": g["sigma_noise"], "draws": g["draws"],
                               "mean_fidelity": float(1 - loss.mean()), "predicted_mean_loss": g["sigma_noise"] ** 2 / 2}
    io.write_json(run.path("mc_summary.json"), summary)
    io.write_plot_script(run.path("plot_mc.py"), "mc_samples.csv", "realization", ["C_est"], "Monte Carlo Chern estimates")


COMMAND_FUNCS = {
    "simulate": cmd_simulate,
    "chern-sweep": cmd_chern_sweep,
    "bhz": cmd_bhz,
    "floquet": cmd_floquet,
    "array": cmd_array,
    "noise-mc": cmd_noise_mc,
}


def resolve_config(command: str, args) -> dict:
    cfg = config.load(command, args.config) if args.config else config.default_config(command)
    for key in ("seed", "threads", "units"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    cfg.setdefault("seed", 0)
    cfg.setdefault("threads", 1)
    cfg.setdefault("units", "dimensionless")
    cfg["command"] = command
    cfg.pop("out", None)
    return config.validate(command, cfg)


def execute(command: str, cfg: dict, out: Path) -> Path:
    run = Run(command, cfg, out)
    COMMAND_FUNCS[command](run)
    return run.finish()


def replay(manifest_path, out: Path) -> dict:
    """Rerun a manifest into ``out``; returns the outputs whose checksums differ."""
    m = io.read_manifest(manifest_path)
    cfg = config.validate(m["command"], m["config"])
    execute(m["command"], cfg, out)
    return io.compare_checksums(m, out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topofreq", description="Topological frequency conversion simulations.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in config.COMMANDS:
        sp = sub.add_parser(name, help=f"run the {name} pipeline")
        sp.add_argument("--config", help="JSON config (default: packaged config for this command)")
        sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sp.add_argument("--out", default=f"out-{name}", help="output directory")
        sp.add_argument("--threads", type=int, help="worker threads")
        sp.add_argument("--units", choices=["dimensionless", "physical"], help="time axis of CSV outputs")
    rp = sub.add_parser("replay", help="rerun a manifest and verify output checksums")
    rp.add_argument("manifest")
    rp.add_argument("--out", required=True, help="directory for the rerun")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            bad = replay(args.manifest, Path(args.out))
            if bad:
                for name, (want, got) in bad.items():
                    print(f"mismatch {name}: expected {want}, got {got}", file=sys.stderr)
                return EXIT_NUMERIC
            print(f"replay reproduced all outputs in {args.out}")
            return EXIT_OK
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = resolve_config(args.command, args)
        manifest = execute(args.command, cfg, Path(args.out))
        print(f"wrote {manifest}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapabilityError as exc:
        print(f"capability error: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except (TopofreqError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
