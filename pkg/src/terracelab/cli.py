"""Batch command-line interface.

Subcommands mirror the pipeline stages: analyze, terrace, simulate, levels,
fit, supersub, planar2d, and pipeline (all stages in order). Every run is
driven by a TOML config plus optional dotted-path overrides, writes
machine-readable JSON reports and CSV tables into --out, and is bit-for-bit
deterministic: identical configs produce identical files.

Exit codes: 0 success, 1 assumption/validation failure, 2 numerical failure,
3 configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from terracelab import fit as fitmod
from terracelab import levelset
from terracelab.comparison import (
    compute_constants,
    sandwich_check,
    verify_supersub_radial,
    verify_supersub_wave,
)
from terracelab.errors import ConfigError, NumericalError, TerraceLabError, ValidationError
from terracelab.nonlinearity import check_assumptions
from terracelab.planar2d import PlanarGrid, build_ellipse_initial, extract_ring, ring_metrics, simulate2d
from terracelab.radial_pde import build_bump_initial, build_terrace_initial, simulate
from terracelab.runconfig import load_config
from terracelab.terrace import decompose

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_CONFIG = 3


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(x)) for x in row))
    path.write_text("\n".join(lines) + "\n")


def _f_hash(cfg) -> str:
    blob = json.dumps(cfg.nonlinearity, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


class Pipeline:
    """Shared lazily computed stage results for one config."""

    def __init__(self, cfg, out: Path, workers: int = 1):
        self.cfg = cfg
        self.out = out
        self.workers = workers
        self._cache = {}

    def nonlinearity(self):
        if "f" not in self._cache:
            self._cache["f"] = self.cfg.build_nonlinearity()
        return self._cache["f"]

    def report(self):
        if "report" not in self._cache:
            self._cache["report"] = check_assumptions(self.nonlinearity())
        return self._cache["report"]

    def terrace(self):
        if "terrace" not in self._cache:
            rep = self.report()
            if not rep.all_pass:
                raise ValidationError(f"assumptions fail: {rep.messages}")
            self._cache["terrace"] = decompose(self.nonlinearity(), workers=self.workers)
        return self._cache["terrace"]

    def trajectory(self):
        if "traj" not in self._cache:
            f = self.nonlinearity()
            grid = self.cfg.build_grid()
            run = self.cfg.run
            kind = run.get("initial", "terrace-seed")
            if kind == "terrace-seed":
                u0, r0 = build_terrace_initial(f, run.get("eps"), grid.N, grid)
            elif kind == "bump":
                u0 = build_bump_initial(f, float(run["theta"]), float(run["R"]), grid)
                r0 = float(run["R"])
            else:
                raise ConfigError("CLI runs need initial = 'terrace-seed' or 'bump'")
            self._cache["traj"] = simulate(
                f, u0, grid, float(run.get("T_final", 100.0)),
                int(run.get("snapshot_stride", max(1, int(round(1.0 / grid.dt))))),
                initial_kind=kind, R0=r0)
        return self._cache["traj"]

    # -- stages ----------------------------------------------------------

    def stage_analyze(self):
        rep = self.report()
        _write_json(self.out / "analyze.json", rep.as_dict())
        return EXIT_OK if rep.all_pass else EXIT_VALIDATION

    def stage_terrace(self):
        terr = self.terrace()
        doc = terr.as_dict()
        doc["pair_table"] = terr.pair_table
        doc["wave_files"] = []
        for k, w in enumerate(terr.waves):
            csv_path = self.out / f"wave_{k}.csv"
            _write_csv(csv_path, ["z", "U"], zip(w.z_samples, w.u_samples))
            _write_json(self.out / f"wave_{k}.json",
                        {"c": w.c, "q_top": w.q_top, "q_bot": w.q_bot,
                         "residual": w.residual})
            doc["wave_files"].append(csv_path.name)
        _write_json(self.out / "terrace.json", doc)
        return EXIT_OK

    def stage_simulate(self):
        traj = self.trajectory()
        rows = [np.concatenate([[t], snap])
                for t, snap in zip(traj.times, traj.snapshots)]
        _write_csv(self.out / "trajectory.csv",
                   ["t"] + [f"r{j}" for j in range(traj.grid.n_nodes)], rows)
        mono = None
        if traj.initial_kind in ("terrace-seed", "bump"):
            from terracelab.radial_pde import monotonicity_report
            mono = monotonicity_report(traj).as_dict()
        _write_json(self.out / "trajectory.json", {
            "grid": traj.grid.as_dict(),
            "initial_kind": traj.initial_kind,
            "R0": traj.R0,
            "f_hash": _f_hash(self.cfg),
            "T_final": float(traj.times[-1]),
            "monotonicity": mono,
        })
        return EXIT_OK

    def stage_levels(self):
        traj = self.trajectory()
        values = self.cfg.levels.get("values", [0.5])
        speeds = {}
        for a in values:
            track = levelset.track_level(traj, float(a))
            est = levelset.estimate_speed(
                track, float(self.cfg.levels.get("tail_fraction", 0.25)))
            m = track.valid_mask & np.isfinite(track.xi)
            t, x = track.times[m], track.xi[m]
            xp = np.gradient(x, t)
            _write_csv(self.out / f"track_{a}.csv", ["t", "xi", "xi_prime"],
                       zip(t, x, xp))
            speeds[str(a)] = est.as_dict()
        doc = {"speeds": speeds}
        pairs = self.cfg.levels.get("dichotomy_pairs", [])
        if pairs:
            terr = self.terrace()
            doc["dichotomy"] = []
            for b_lo, b_hi in pairs:
                rep = levelset.gap_dichotomy(traj, float(b_lo), float(b_hi),
                                             terrace=terr)
                doc["dichotomy"].append(rep.as_dict())
        _write_json(self.out / "levels.json", doc)
        return EXIT_OK

    def stage_fit(self):
        traj = self.trajectory()
        terr = self.terrace()
        shifts = fitmod.fit_shifts(traj, terr)
        times, rho = fitmod.convergence_residual(traj, terr, shifts)
        rows = []
        for i, t in enumerate(times):
            row = [t]
            for s in shifts:
                row.append(float(np.interp(t, s.times, s.eta)))
                row.append(float(np.interp(t, s.times, s.eta_prime)))
            row.append(rho[i])
            rows.append(row)
        header = ["t"]
        for s in shifts:
            header += [f"eta_{s.wave_index}", f"eta_prime_{s.wave_index}"]
        header.append("rho")
        _write_csv(self.out / "shifts.csv", header, rows)
        _write_json(self.out / "fit.json", {
            "anchors": [s.anchor for s in shifts],
            "r0": [s.r0 for s in shifts],
            "eta_prime_tail_sup": [s.tail_sup_eta_prime() for s in shifts],
            "rho_final": float(rho[-1]),
            "rho_mid": float(rho[np.argmin(np.abs(times - times[-1] / 2))]),
        })
        return EXIT_OK

    def stage_supersub(self):
        f = self.nonlinearity()
        terr = self.terrace()
        traj = self.trajectory()
        if traj.initial_kind != "terrace-seed":
            raise ConfigError("supersub needs a terrace-seed trajectory")
        ss = self.cfg.supersub
        doc = {}
        wave = terr.waves[0]
        cw = compute_constants(f, wave=wave,
                               eps_nbhd=ss.get("eps_nbhd_wave"))
        doc["wave_constants"] = cw.as_dict()
        doc["wave_verify"] = verify_supersub_wave(
            f, wave, cw, float(ss.get("r0", 0.0)), float(ss.get("t0", 1.0))).as_dict()
        cr = compute_constants(f, trajectory=traj, floors=terr.floors,
                               eps_nbhd=ss.get("eps_nbhd_radial"))
        doc["radial_constants"] = cr.as_dict()
        doc["radial_verify"] = verify_supersub_radial(
            f, traj, cr, float(ss.get("t0", 1.0))).as_dict()
        if "bump_theta" in ss:
            grid = traj.grid
            u0 = build_bump_initial(f, float(ss["bump_theta"]),
                                    float(ss["bump_R"]), grid)
            stride = int(self.cfg.run.get("snapshot_stride",
                                          max(1, int(round(1.0 / grid.dt)))))
            u_traj = simulate(f, u0, grid, float(traj.times[-1]), stride,
                              initial_kind="bump", R0=float(ss["bump_R"]))
            doc["sandwich"] = sandwich_check(u_traj, traj, cr).as_dict()
        _write_json(self.out / "supersub.json", doc)
        return EXIT_OK

    def stage_planar2d(self):
        f = self.nonlinearity()
        terr = self.terrace()
        p2 = self.cfg.planar2d
        if not p2:
            raise ConfigError("planar2d block missing from config")
        grid = PlanarGrid(nx=int(p2.get("nx", 1024)),
                          extent=float(p2["extent"]),
                          dt=float(p2["dt"]) if "dt" in p2 else None,
                          scheme=p2.get("scheme", "adi"))
        u0 = build_ellipse_initial(f, float(p2.get("theta", 0.6)),
                                   float(p2["ax_x"]), float(p2["ax_y"]), grid)
        T_final = float(p2.get("T_final", 100.0))
        ring_times = p2.get("ring_times") or list(
            np.linspace(T_final / 2, T_final, 6))
        level = float(p2.get("level", 0.5))
        traj = simulate2d(f, u0, grid, T_final,
                          snapshot_times=[0.0] + list(ring_times))
        rings = [extract_ring(traj, level, t, int(p2.get("n_directions", 64)))
                 for t in ring_times]
        metrics = ring_metrics(rings, terr)
        rows = []
        for ring in rings:
            for ang, xi in zip(ring.angles, ring.xi):
                rows.append([ring.time, ang, xi])
        _write_csv(self.out / "rings.csv", ["t", "angle", "xi"], rows)
        _write_json(self.out / "planar_metrics.json", metrics.as_dict())
        if self.cfg.output.get("svg", False):
            _write_svg(self.out / "ring.svg", rings[-1], grid.extent)
        return EXIT_OK

    def stage_pipeline(self):
        codes = [self.stage_analyze()]
        if codes[0] != EXIT_OK:
            return codes[0]
        codes.append(self.stage_terrace())
        codes.append(self.stage_simulate())
        codes.append(self.stage_levels())
        codes.append(self.stage_fit())
        codes.append(self.stage_supersub())
        if self.cfg.planar2d:
            codes.append(self.stage_planar2d())
        return max(codes)


def _write_svg(path: Path, ring, extent: float):
    """Minimal deterministic contour plot of one ring extract."""
    size = 640
    scale = size / (2 * extent)
    pts = []
    for ang, xi in zip(ring.angles, ring.xi):
        x = (xi * np.cos(ang) + extent) * scale
        y = (extent - xi * np.sin(ang)) * scale
        pts.append(f"{x:.2f},{y:.2f}")
    pts.append(pts[0])
    body = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">\n'
        f'<rect width="{size}" height="{size}" fill="white"/>\n'
        f'<polyline points="{" ".join(pts)}" fill="none" stroke="black" '
        f'stroke-width="1.5"/>\n'
        f'<text x="8" y="20" font-size="14">level {ring.level} at t={ring.time}</text>\n'
        f"</svg>\n")
    path.write_text(body)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="terracelab",
        description="Propagating-terrace laboratory for multistable "
                    "reaction-diffusion equations")
    parser.add_argument("experiment", choices=[
        "analyze", "terrace", "simulate", "levels", "fit", "supersub",
        "planar2d", "pipeline"])
    parser.add_argument("--config", required=True, help="TOML config file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--workers", type=int,
                        default=int(os.environ.get("TERRACELAB_WORKERS", "1")),
                        help="worker pool size for pairwise front computations")
    parser.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="dotted-path config override (repeatable)")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.override)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pipe = Pipeline(cfg, out, workers=max(1, args.workers))
    stage = getattr(pipe, f"stage_{args.experiment}")
    try:
        return stage()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except TerraceLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
