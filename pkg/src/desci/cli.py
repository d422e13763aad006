"""Command line front end: ``desci simulate|reconstruct|score``.

A run is described by one INI file.  Relative paths in it are resolved
against the file's own directory.  Minimal example::

    [scene]
    source = moving_square
    nx = 32
    ny = 32
    frames = 8

    [sensing]
    density = 0.5
    seed = 0
    snr_db = 20

    [output]
    dir = run1

``simulate`` writes ``mask.scicube``, ``measurement.scicube``,
``truth.scicube``, ``noise.scicube`` (noisy runs only) and ``manifest.txt``
into the output directory.  ``reconstruct`` reads them back and writes
``recon-<algorithm>.scicube`` and ``telemetry-<algorithm>.csv``.

Exit codes: 0 success, 2 bad configuration or input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .data import (CubeFormatError, FrameCube, Measurement, load_cube, load_mask, load_measurement,
                   save_cube, save_frames)
from .metrics import psnr, ssim, write_metrics_csv
from .scenes import moving_square, spectral_blobs
from .sensing import (SensingOperator, forward, gen_shifting_binary_mask,
                      gen_spectral_shift_masks, measurement_snr, noise_sigma_for_snr)
from .solver import (DivergenceError, SolverConfig, config_for_snr, desci_run, gamma_for_snr,
                     sigma_schedule_default, write_telemetry_csv)
from .tv import TvConfig, gaptv_run

log = logging.getLogger("desci")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

DEFAULTS = {
    "scene": {"source": "moving_square", "path": "", "nx": "32", "ny": "32", "frames": "8"},
    "sensing": {"mask": "shifting", "density": "0.5", "seed": "0", "shift": "1,0",
                "snr_db": ""},
    "solver": {"algorithm": "desci", "mode": "", "gamma": "", "c": "2.8", "max_iter": "60",
               "sigma_schedule": ",".join(repr(s) for s in sigma_schedule_default()),
               "tol": "1e-4", "rematch_every": "20", "search_l": "30", "search_h": "8",
               "stride": "", "patch_side": "", "group_m": "", "center_groups": "yes",
               "threads": "1"},
    "tv": {"weight": "200", "iters": "30", "max_iter": "200", "tol": "1e-4"},
    "output": {"dir": "out", "use_truth": "yes"},
}


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


class Run:
    """Parsed configuration plus the directory it lives in."""

    def __init__(self, path: Optional[str]):
        self.cp = configparser.ConfigParser()
        self.cp.read_dict(DEFAULTS)
        self.base = Path(".")
        if path is not None:
            p = Path(path)
            if not p.is_file():
                raise ConfigError(f"config file {path} not found")
            try:
                self.cp.read(p)
            except configparser.Error as exc:
                raise ConfigError(str(exc)) from exc
            self.base = p.parent
        unknown = set(self.cp.sections()) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    def get(self, section, key, conv=str):
        raw = self.cp.get(section, key).strip()
        try:
            return conv(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc

    def optional(self, section, key, conv=float):
        return self.get(section, key, conv) if self.cp.get(section, key).strip() else None

    def flag(self, section, key) -> bool:
        try:
            return self.cp.getboolean(section, key)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from exc

    @property
    def outdir(self) -> Path:
        return self.base / self.get("output", "dir")


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _scene(run: Run) -> FrameCube:
    source = run.get("scene", "source")
    nx, ny, B = (run.get("scene", k, int) for k in ("nx", "ny", "frames"))
    if source == "moving_square":
        return moving_square(nx, ny, B)
    if source == "spectral_blobs":
        return spectral_blobs(nx, ny, B)
    if source == "file":
        return load_cube(run.base / run.get("scene", "path"))
    raise ConfigError(f"unknown scene source {source!r}")


def _masks(run: Run, nx, ny, B, seed):
    kind = run.get("sensing", "mask")
    density = run.get("sensing", "density", float)
    shift = tuple(run.get("sensing", "shift", _ints))
    if len(shift) != 2:
        raise ConfigError("[sensing] shift needs two integers")
    if kind == "shifting":
        return gen_shifting_binary_mask(nx, ny, B, density, seed=seed, shift=shift)
    if kind == "spectral":
        return gen_spectral_shift_masks(nx, ny, B, density, seed=seed, dispersion_step=shift)
    raise ConfigError(f"unknown mask kind {kind!r}")


def cmd_simulate(run: Run, seed: Optional[int] = None) -> Path:
    truth = _scene(run)
    seed = run.get("sensing", "seed", int) if seed is None else seed
    masks = _masks(run, truth.nx, truth.ny, truth.B, seed)
    snr_db = run.optional("sensing", "snr_db")
    clean = SensingOperator(masks).A(np.asarray(truth.values, dtype=np.float64))
    out = run.outdir
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"seed": str(seed), "snr_db": "none" if snr_db is None else repr(snr_db),
                "shape": f"{truth.B},{truth.nx},{truth.ny}", "mask": "mask.scicube",
                "measurement": "measurement.scicube", "truth": "truth.scicube"}
    if snr_db is None:
        y = forward(SensingOperator(masks), truth)
        (out / "noise.scicube").unlink(missing_ok=True)
    else:
        sigma = noise_sigma_for_snr(clean, snr_db)
        op = SensingOperator(masks, noise_sigma=sigma)
        # noise stream kept separate from the mask stream of the same seed
        y = forward(op, truth, rng=np.random.default_rng([seed, 1]))
        noise = y.values - clean
        save_cube(Measurement(noise), out / "noise.scicube")
        manifest.update(noise="noise.scicube", noise_sigma=repr(sigma),
                        empirical_snr_db=repr(measurement_snr(clean, noise)))
    save_cube(masks, out / "mask.scicube")
    save_cube(y, out / "measurement.scicube")
    save_cube(truth, out / "truth.scicube")
    cp = configparser.ConfigParser()
    cp["manifest"] = manifest
    with open(out / "manifest.txt", "w") as fh:
        cp.write(fh)
    log.info("simulated %s into %s", manifest["shape"], out)
    return out / "manifest.txt"


def _read_manifest(out: Path) -> configparser.SectionProxy:
    path = out / "manifest.txt"
    if not path.is_file():
        raise ConfigError(f"no manifest in {out}; run 'simulate' first")
    cp = configparser.ConfigParser()
    cp.read(path)
    return cp["manifest"]


def solver_config(run: Run, snr_db: Optional[float], mode: Optional[str] = None,
                  threads: Optional[int] = None) -> SolverConfig:
    """SolverConfig from ``[solver]``; unset mode/gamma follow the measurement SNR."""
    side, M = run.optional("solver", "patch_side", int), run.optional("solver", "group_m", int)
    if (side is None) != (M is None):
        raise ConfigError("[solver] patch_side and group_m must be given together")
    mode = mode or run.get("solver", "mode") or None
    gamma = run.optional("solver", "gamma")
    fields = dict(
        c=run.get("solver", "c", float), max_iter=run.get("solver", "max_iter", int),
        sigma_schedule=run.get("solver", "sigma_schedule", _floats),
        tol=run.get("solver", "tol", float), rematch_every=run.get("solver", "rematch_every", int),
        search_L=run.get("solver", "search_l", int), search_H=run.get("solver", "search_h", int),
        stride=run.optional("solver", "stride", int),
        patch_params=None if side is None else (side, M),
        center_groups=run.flag("solver", "center_groups"),
        workers=threads or run.get("solver", "threads", int))
    auto = config_for_snr(snr_db)
    fields["mode"] = mode or auto.mode
    if gamma is not None:
        fields["gamma"] = gamma
    elif fields["mode"] == "admm":
        fields["gamma"] = gamma_for_snr(snr_db)
    try:
        return SolverConfig(**fields)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def tv_config(run: Run, mode: Optional[str] = None) -> TvConfig:
    cfg = TvConfig(mode=mode or run.get("solver", "mode") or "gap-acc",
                   gamma=run.optional("solver", "gamma") or 0.0,
                   tv_weight=run.get("tv", "weight", float), tv_iters=run.get("tv", "iters", int),
                   max_iter=run.get("tv", "max_iter", int), tol=run.get("tv", "tol", float))
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def cmd_reconstruct(run: Run, algorithm: Optional[str] = None, mode: Optional[str] = None,
                    threads: Optional[int] = None, dump_frames: Optional[str] = None) -> Path:
    out = run.outdir
    man = _read_manifest(out)
    algorithm = algorithm or run.get("solver", "algorithm")
    if algorithm not in ("desci", "gap-tv"):
        raise ConfigError(f"unknown algorithm {algorithm!r}")
    snr = None if man.get("snr_db", "none") == "none" else float(man["snr_db"])
    try:
        masks = load_mask(out / man["mask"])
        y = load_measurement(out / man["measurement"])
        truth = None
        if run.flag("output", "use_truth") and (out / man.get("truth", "")).is_file():
            truth = load_cube(out / man["truth"])
    except (OSError, KeyError) as exc:
        raise ConfigError(f"missing input: {exc}") from exc
    op = SensingOperator(masks)
    if algorithm == "desci":
        cfg = solver_config(run, snr, mode, threads)
        rec, reports = desci_run(op, y, cfg, truth=truth)
    else:
        rec, reports = gaptv_run(op, y, tv_config(run, mode), truth=truth)
    save_cube(rec, out / f"recon-{algorithm}.scicube")
    write_telemetry_csv(out / f"telemetry-{algorithm}.csv", reports)
    if dump_frames:
        save_frames(rec, out / dump_frames, prefix=algorithm)
    last = reports[-1]
    log.info("%s finished after %d iterations, residual %.4g%s", algorithm, last.iteration,
             last.residual, "" if last.psnr is None else f", PSNR {last.psnr:.2f} dB")
    return out / f"recon-{algorithm}.scicube"


def cmd_score(recon_path, truth_path, out_path) -> Path:
    recon, truth = load_cube(recon_path), load_cube(truth_path)
    if recon.shape != truth.shape:
        raise ConfigError(f"shape mismatch: reconstruction {recon.shape} vs truth {truth.shape}")
    per_psnr, mean_psnr = psnr(truth, recon)
    per_ssim, mean_ssim = ssim(truth, recon)
    write_metrics_csv(out_path, per_psnr, per_ssim)
    print(f"PSNR {mean_psnr:.4f} dB  SSIM {mean_ssim:.4f}")
    return Path(out_path)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="desci", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", help="generate masks and a coded measurement")
    sim.add_argument("--config", required=True)
    sim.add_argument("--seed", type=int, help="override [sensing] seed")
    rec = sub.add_parser("reconstruct", help="recover the frame cube from a measurement")
    rec.add_argument("--config", required=True)
    rec.add_argument("--algorithm", choices=("desci", "gap-tv"))
    rec.add_argument("--mode", choices=("admm", "gap", "gap-acc"))
    rec.add_argument("--threads", type=int, help="block-matching worker threads")
    rec.add_argument("--dump-frames", nargs="?", const="frames", metavar="DIR",
                     help="write PNG frames into DIR under the output directory")
    sc = sub.add_parser("score", help="PSNR/SSIM of a reconstruction against ground truth")
    sc.add_argument("recon")
    sc.add_argument("truth")
    sc.add_argument("--out", default="metrics.csv")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "simulate":
            cmd_simulate(Run(args.config), seed=args.seed)
        elif args.command == "reconstruct":
            if args.threads is not None and args.threads < 1:
                raise ConfigError("--threads must be at least 1")
            cmd_reconstruct(Run(args.config), args.algorithm, args.mode, args.threads,
                            args.dump_frames)
        else:
            cmd_score(args.recon, args.truth, args.out)
    except (ConfigError, CubeFormatError, FileNotFoundError) as exc:
        print(f"desci: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"desci: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
