"""Command-line driver: simulate, reconstruct, tune, sweep, eval.

Every command resolves its configuration fully (defaults materialized,
nothing implicit), writes its outputs into ``--out``, and drops a
``manifest.json`` recording the resolved configuration. Re-running with
``--replay manifest.json`` reproduces the outputs byte for byte, because
every random draw is derived from the recorded seed and every numeric
default is pinned in the manifest.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, NumericalError, PluginError, ZadsError
from .fileio import (load_complex, load_mask, read_manifest, save_complex,
                     save_mask, write_csv, write_manifest, write_pgm)
from .linalg import CgConfig
from .metrics import evaluate_images
from .mri import (EncodingOperator, MultiCoilKSpace, SamplingMask,
                  make_coil_maps, make_equispaced_mask, make_phantom,
                  restrict_kspace, simulate_kspace)
from .plugin import PluginClient, PluginPrior
from .priors import GaussianPrior, ZeroPrior, power_law_spectrum
from .rng import TAG_PRIOR_SAMPLE, TAG_XT, rng_for
from .samplers import (SamplerConfig, dds_reconstruct, dps_reconstruct,
                       draw_frozen_noise, weighted_reverse_pass, zero_filled)
from .schedules import (make_banded_sequence, make_linear_schedule,
                        make_uniform_sequence)
from .ssdu import split_mask
from .tuner import TuneProblem, TunerConfig, holdout_loss, tune

log = logging.getLogger("zads")

SCHEMA_VERSION = 1

DEFAULT_CONFIG = {
    "schema_version": SCHEMA_VERSION,
    "height": 64,
    "width": 64,
    "coils": 4,
    "r": 4,
    "acs": 8,
    "noise_std": 0.005,
    "seed": 0,
    "object": "phantom",
    "data_dir": "data",
    "method": "zads",
    "weights_file": None,
    "plugin": None,
    "eta": 0.85,
    "zeta": 1.0,
    "rho": 0.4,
    "schedule": {"t_total": 1000, "beta_start": 1e-4, "beta_end": 0.02},
    "sequence": {"kind": "banded", "steps": 8,
                 "bands": [[0.1, 5], [0.5, 2], [1.0, 1]]},
    "cg": {"max_iter": 15, "tol": 0.0},
    "prior": {"kind": "gaussian", "mean": "zero", "corner": 0.05,
              "power": 3.0, "total": None},
    "tuner": {"epochs": 10, "learning_rate": 0.3,
              "grad_mode": "replay-analytic", "fd_step": 1e-3,
              "optimizer": "adam-like", "init_zeta": 0.1,
              "resplit_per_epoch": False},
    "grid": [0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0],
    "ref": None,
    "test": None,
}


def _merge(defaults: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(defaults[key], dict) and isinstance(value, dict):
            out[key] = _merge(defaults[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve_config(args) -> dict:
    """Materialize the effective configuration for this invocation."""
    if args.replay:
        manifest = read_manifest(args.replay)
        if "config" not in manifest:
            raise ConfigError(f"{args.replay}: not a run manifest")
        cfg = _merge(DEFAULT_CONFIG, manifest["config"])
    elif args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                user = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{args.config}: invalid JSON ({exc})") from exc
        cfg = _merge(DEFAULT_CONFIG, user)
    else:
        cfg = copy.deepcopy(DEFAULT_CONFIG)
    if cfg["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported config schema {cfg['schema_version']} "
            f"(this build speaks {SCHEMA_VERSION})")
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.plugin is not None:
        cfg["plugin"] = args.plugin
    if getattr(args, "method", None):
        cfg["method"] = args.method
    return cfg


def build_schedule(cfg):
    sc = cfg["schedule"]
    return make_linear_schedule(sc["t_total"], sc["beta_start"], sc["beta_end"])


def build_sequence(cfg):
    sq = cfg["sequence"]
    t_total = cfg["schedule"]["t_total"]
    if sq["kind"] == "uniform":
        return make_uniform_sequence(t_total, sq["steps"])
    if sq["kind"] == "banded":
        bands = [(float(hi), int(n)) for hi, n in sq["bands"]]
        seq = make_banded_sequence(t_total, bands)
        if len(seq) != sq["steps"]:
            raise ConfigError(
                f"band counts sum to {len(seq)}, but steps = {sq['steps']}")
        return seq
    raise ConfigError(f"unknown sequence kind {sq['kind']!r}")


def build_sampler_config(cfg) -> SamplerConfig:
    return SamplerConfig(sched=build_schedule(cfg), sequence=build_sequence(cfg),
                         eta=cfg["eta"],
                         cg=CgConfig(max_iter=cfg["cg"]["max_iter"],
                                     tol=cfg["cg"]["tol"]))


def build_prior(cfg, height, width):
    """Built-in prior, or a plug-in client when one is configured."""
    if cfg["plugin"]:
        return PluginPrior(PluginClient(cfg["plugin"], height, width))
    pc = cfg["prior"]
    if pc["kind"] == "zero":
        return ZeroPrior()
    if pc["kind"] == "gaussian":
        # total=None means unit average mode variance, the scale the
        # diffusion forward process assumes for its data.
        total = pc["total"] if pc["total"] is not None else float(height * width)
        spectrum = power_law_spectrum(height, width, corner=pc["corner"],
                                      power=pc["power"], total=total)
        if pc["mean"] == "zero":
            mean = np.zeros((height, width), dtype=np.complex128)
        elif pc["mean"] == "phantom":
            mean = make_phantom(height, width, cfg["seed"])
        else:
            raise ConfigError(f"unknown prior mean {pc['mean']!r}")
        return GaussianPrior(mean, spectrum)
    raise ConfigError(f"unknown prior kind {pc['kind']!r}")


def _manifest(cfg, command, derived=None) -> dict:
    return {
        "command": command,
        "config": cfg,
        "derived": derived or {},
        "package_version": __version__,
    }


def _load_data(cfg):
    """Read the simulate outputs the reconstruction commands consume."""
    data_dir = Path(cfg["data_dir"])
    coils = load_complex(data_dir / "coils.npy")
    kspace = load_complex(data_dir / "kspace.npy")
    mask_flags = load_mask(data_dir / "mask.npy")
    lines = np.flatnonzero(mask_flags)
    acs_lines = np.array([], dtype=np.int64)
    sim_manifest = data_dir / "manifest.json"
    if sim_manifest.exists():
        derived = read_manifest(sim_manifest).get("derived", {})
        acs_lines = np.asarray(derived.get("acs_lines", []), dtype=np.int64)
    mask = SamplingMask(width=mask_flags.size, lines=lines, acs_lines=acs_lines)
    op = EncodingOperator(coils, mask)
    y = MultiCoilKSpace(kspace, mask)
    phantom_path = data_dir / "phantom.npy"
    phantom = load_complex(phantom_path) if phantom_path.exists() else None
    return op, y, phantom


def _write_recon(out: Path, x, phantom, method):
    save_complex(out / "recon.npy", x)
    write_pgm(out / "recon.pgm", np.abs(x))
    if phantom is not None:
        pair = evaluate_images(phantom, x)
        write_csv(out / "metrics.csv", ["method", "psnr", "ssim"],
                  [[method, pair.psnr, pair.ssim]])
        log.info("%s: psnr=%.2f dB ssim=%.4f", method, pair.psnr, pair.ssim)


def cmd_simulate(cfg, out: Path, jobs: int) -> dict:
    height, width, seed = cfg["height"], cfg["width"], cfg["seed"]
    if cfg["object"] == "phantom":
        x = make_phantom(height, width, seed)
    elif cfg["object"] == "prior-sample":
        prior = build_prior(cfg, height, width)
        if not isinstance(prior, GaussianPrior):
            raise ConfigError("object=prior-sample needs a gaussian prior")
        x = prior.sample(rng_for(seed, TAG_PRIOR_SAMPLE))
    else:
        raise ConfigError(f"unknown object {cfg['object']!r}")
    coils = make_coil_maps(height, width, cfg["coils"], seed)
    mask = make_equispaced_mask(width, cfg["r"], cfg["acs"])
    op = EncodingOperator(coils, mask)
    y = simulate_kspace(op, x, cfg["noise_std"], seed)

    save_complex(out / "phantom.npy", x)
    save_complex(out / "coils.npy", coils)
    save_mask(out / "mask.npy", mask.as_bool())
    save_complex(out / "kspace.npy", y.data)
    log.info("simulated %dx%d, %d coils, %d/%d lines sampled",
             height, width, cfg["coils"], mask.n_lines, width)
    return {"mask_lines": mask.lines.tolist(),
            "acs_lines": mask.acs_lines.tolist()}


def _tune_once(cfg, op, y):
    scfg = build_sampler_config(cfg)
    split = split_mask(op.mask, cfg["rho"], cfg["seed"])
    prior = build_prior(cfg, op.height, op.width)
    t = cfg["tuner"]
    tcfg = TunerConfig(epochs=t["epochs"], learning_rate=t["learning_rate"],
                       grad_mode=t["grad_mode"], fd_step=t["fd_step"],
                       optimizer=t["optimizer"], init_zeta=t["init_zeta"],
                       resplit_per_epoch=t["resplit_per_epoch"])
    problem = TuneProblem(op=op, y=y, split=split, prior=prior)
    report = tune(problem, tcfg, scfg, seed=cfg["seed"])
    return report, split, scfg


def _write_tune_outputs(out: Path, report, split):
    n_steps = report.final_weights.size
    save_complex(out / "recon.npy", report.final_x0)
    np.save(out / "weights.npy", report.final_weights)
    header = ["epoch", "loss", "grad_norm"] + [f"zeta_{i}" for i in range(n_steps)]
    rows = [[e, report.losses[e], report.grad_norms[e], *report.zetas[e]]
            for e in range(report.losses.size)]
    write_csv(out / "tune_report.csv", header, rows)
    return {
        "dc_lines": split.dc_mask.lines.tolist(),
        "loss_lines": split.loss_mask.lines.tolist(),
        "final_zeta": report.final_weights.tolist(),
        "final_loss": report.final_loss,
        "nfe": report.nfe,
    }


def cmd_tune(cfg, out: Path, jobs: int) -> dict:
    op, y, phantom = _load_data(cfg)
    report, split, _ = _tune_once(cfg, op, y)
    derived = _write_tune_outputs(out, report, split)
    write_pgm(out / "recon.pgm", np.abs(report.final_x0))
    if phantom is not None:
        pair = evaluate_images(phantom, report.final_x0)
        write_csv(out / "metrics.csv", ["method", "psnr", "ssim"],
                  [["zads", pair.psnr, pair.ssim]])
    log.info("tuned %d steps over %d epochs: loss %.4f -> %.4f",
             report.final_weights.size, report.losses.size,
             report.losses[0], report.final_loss)
    return derived


def cmd_reconstruct(cfg, out: Path, jobs: int) -> dict:
    op, y, phantom = _load_data(cfg)
    method = cfg["method"]
    scfg = build_sampler_config(cfg)
    derived = {}
    if method == "zf":
        x = zero_filled(op, y)
    elif method == "dps":
        prior = build_prior(cfg, op.height, op.width)
        mode = "exact" if hasattr(prior, "x0_jacobian_apply") else "surrogate"
        x = dps_reconstruct(op, y, prior, scfg.sched, scfg.sequence,
                            eta=scfg.eta, zeta=cfg["zeta"], seed=cfg["seed"],
                            jacobian=mode)
    elif method == "dds":
        prior = build_prior(cfg, op.height, op.width)
        x = dds_reconstruct(op, y, prior, scfg.sched, scfg.sequence,
                            eta=scfg.eta, zeta=cfg["zeta"], cg=scfg.cg,
                            seed=cfg["seed"])
    elif method == "zads":
        if cfg["weights_file"]:
            weights = np.load(cfg["weights_file"]).astype(np.float64)
            derived["weights"] = weights.tolist()
        else:
            report, split, _ = _tune_once(cfg, op, y)
            derived = _write_tune_outputs(out, report, split)
            weights = report.final_weights
        # Inference pass: the tuned per-step weights applied against the
        # full sampling mask (tuning itself only ever sees the dc subset).
        frozen = draw_frozen_noise((op.height, op.width), scfg.sched,
                                   scfg.sequence, scfg.eta,
                                   rng_for(cfg["seed"], TAG_XT))
        prior = build_prior(cfg, op.height, op.width)
        x = weighted_reverse_pass(op, y, scfg.sched, scfg.sequence,
                                  weights, eta=scfg.eta, cg=scfg.cg,
                                  prior=prior, frozen=frozen).x0
    else:
        raise ConfigError(f"unknown method {method!r}")
    _write_recon(out, x, phantom, method)
    return derived


def cmd_sweep(cfg, out: Path, jobs: int) -> dict:
    op, y, phantom = _load_data(cfg)
    if phantom is None:
        raise ConfigError("sweep needs the simulated ground truth (phantom.npy)")
    grid = sorted(float(z) for z in cfg["grid"])
    if not grid:
        raise ConfigError("sweep grid is empty")
    scfg = build_sampler_config(cfg)
    split = split_mask(op.mask, cfg["rho"], cfg["seed"])
    op_loss = op.with_mask(split.loss_mask)
    y_loss = restrict_kspace(y, split.loss_mask)

    def one(zeta: float):
        prior = build_prior(cfg, op.height, op.width)
        x = dds_reconstruct(op, y, prior, scfg.sched, scfg.sequence,
                            eta=scfg.eta, zeta=zeta, cg=scfg.cg,
                            seed=cfg["seed"])
        pair = evaluate_images(phantom, x)
        return [zeta, pair.psnr, pair.ssim, holdout_loss(op_loss, y_loss, x)]

    if jobs > 1 and not cfg["plugin"]:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, grid))
    else:
        rows = [one(z) for z in grid]
    write_csv(out / "sweep.csv", ["zeta", "psnr", "ssim", "holdout_loss"], rows)
    log.info("swept %d weights on %s", len(grid), cfg["data_dir"])
    return {"grid": grid,
            "dc_lines": split.dc_mask.lines.tolist(),
            "loss_lines": split.loss_mask.lines.tolist()}


def cmd_eval(cfg, out: Path, jobs: int) -> dict:
    if not cfg["ref"] or not cfg["test"]:
        raise ConfigError("eval needs config keys 'ref' and 'test' (NPY paths)")
    ref = load_complex(cfg["ref"])
    test = load_complex(cfg["test"])
    pair = evaluate_images(ref, test)
    write_csv(out / "eval.csv", ["psnr", "ssim"], [[pair.psnr, pair.ssim]])
    log.info("eval: psnr=%s ssim=%.6f", pair.psnr, pair.ssim)
    return {"psnr": pair.psnr if np.isfinite(pair.psnr) else "inf",
            "ssim": pair.ssim}


COMMANDS = {
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "tune": cmd_tune,
    "sweep": cmd_sweep,
    "eval": cmd_eval,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zads",
        description="Self-tuned diffusion sampling for undersampled "
                    "multi-coil Fourier reconstruction.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker threads for independent runs")
    parser.add_argument("--replay", help="rerun from a previous manifest.json")
    parser.add_argument("--plugin", default=None,
                        help="external denoiser command line")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--method", default=None,
                        choices=["zf", "dps", "dds", "zads"],
                        help="reconstruction method (reconstruct only)")
    return parser


def _setup_logging():
    level = os.environ.get("ZADS_LOG", "info").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO,
              "debug": logging.DEBUG}
    if level not in levels:
        raise ConfigError(f"ZADS_LOG must be one of {sorted(levels)}, got {level!r}")
    logging.basicConfig(level=levels[level],
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        _setup_logging()
        cfg = resolve_config(args)
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        derived = COMMANDS[args.command](cfg, out, args.jobs)
        write_manifest(out / "manifest.json", _manifest(cfg, args.command, derived))
    except ConfigError as exc:
        print(f"zads: config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"zads: numerical failure: {exc}", file=sys.stderr)
        return 3
    except PluginError as exc:
        print(f"zads: plug-in failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"zads: i/o failure: {exc}", file=sys.stderr)
        return 4
    except ZadsError as exc:
        print(f"zads: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
