"""Command-line interface.

Subcommands: ``gen-orbit``, ``gen-dataset``, ``eval-mesh``, ``eval-images``
and ``replay``.  Exit codes: 0 success, 1 runtime/data error, 2 usage error.
Each run writes a JSON manifest next to its outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DomainError, GeometryError, ParseError, PropagationError, RankError

log = logging.getLogger("rsorecon")

DEFAULT_SEED = 0
EXIT_OK, EXIT_ERROR, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not v > 0 or (kind is float and not math.isfinite(v)):
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return v
    return conv


def _finite(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be finite: {text!r}")
    return v


def _duration(text):
    if text.strip().lower() == "period":
        return "period"
    return _positive(float)(text)


def _write_manifest(path: Path, command: str, argv: list, config: dict, seed, outputs: list, t0: float) -> Path:
    doc = {
        "command": command,
        "argv": argv,
        "config": config,
        "seed": seed,
        "tool_version": __version__,
        "outputs": [str(p) for p in outputs],
        "wall_clock_s": time.perf_counter() - t0,
        "finished_utc": datetime.now(timezone.utc).isoformat(),
    }
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


# -- gen-orbit --------------------------------------------------------------

def cmd_gen_orbit(args, argv):
    from .hill import (OrbitParams, bounded_ic, cw_closed_form_many, inclined_bounded_ic,
                       propagate_rk4)

    t0 = time.perf_counter()
    orbit = OrbitParams.from_altitude(args.altitude_km * 1000.0)
    n = orbit.mean_motion
    duration = orbit.period if args.duration == "period" else args.duration
    steps = max(1, int(math.ceil(duration / args.dt - 1e-9)))
    s0 = bounded_ic(args.x0, n) if args.planar else inclined_bounded_ic(args.x0, n)
    if args.integrator == "rk4":
        traj = propagate_rk4(s0, n, duration / steps, steps, orbit)
    else:
        traj = cw_closed_form_many(s0, n, np.linspace(0.0, duration, steps + 1), orbit)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    traj.to_csv(out)
    config = {
        "x0": args.x0, "altitude_km": args.altitude_km, "mu": orbit.mu, "chief_radius": orbit.chief_radius,
        "mean_motion": n, "duration": duration, "dt": duration / steps, "steps": steps,
        "geometry": "planar" if args.planar else "inclined", "integrator": args.integrator,
    }
    manifest = out.with_name(out.stem + ".manifest.json")
    _write_manifest(manifest, "gen-orbit", argv, config, None, [out], t0)
    print(f"wrote {out} ({len(traj)} samples)")
    return EXIT_OK


# -- gen-dataset ------------------------------------------------------------

DATASET_FLAGS = {
    "frames": "frame_count",
    "tumble_rate_deg_s": "tumble_rate_deg_s",
    "tumble_axis": "tumble_axis",
    "fov_deg": "horizontal_fov_deg",
    "width": "width",
    "height": "height",
    "seed": "seed",
    "x0": "x0",
    "duration": "duration",
    "altitude_km": "altitude_km",
}


def cmd_gen_dataset(args, argv):
    from .scenario import (build_scenario, config_from_mapping, config_to_mapping, export_ground_truth,
                           export_transforms, load_config)

    t0 = time.perf_counter()
    values = load_config(args.config) if args.config else {}
    overrides = {}
    for flag, key in DATASET_FLAGS.items():
        v = getattr(args, flag)
        if v is not None:
            overrides[key] = v
    if "horizontal_fov_deg" in overrides:
        values.pop("horizontal_fov", None)
    if "altitude_km" in overrides:
        values.pop("chief_radius", None)
    values.update(overrides)
    values.setdefault("seed", DEFAULT_SEED)
    try:
        config = config_from_mapping(values)
    except ConfigError as exc:
        if exc.key in overrides.values() or exc.key in overrides:
            raise UsageError(str(exc)) from None
        raise
    dataset = build_scenario(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = [
        export_transforms(dataset, out_dir / "transforms.json"),
        export_ground_truth(dataset, out_dir / "ground_truth.csv"),
    ]
    _write_manifest(out_dir / "manifest.json", "gen-dataset", argv, config_to_mapping(config), config.seed, outputs, t0)
    print(f"wrote {len(dataset.frames)} frames to {out_dir}")
    return EXIT_OK


# -- eval-mesh --------------------------------------------------------------

def _read_correspondences(path):
    data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    if data.shape[1] != 6:
        raise ParseError(f"{path}: expected 6 columns (src xyz, dst xyz), got {data.shape[1]}")
    return data[:, :3], data[:, 3:]


def cmd_eval_mesh(args, argv):
    from .mesh import (bidirectional_report, build_bvh, c2m_signed, default_missing_threshold,
                       export_heatmap, icp_refine, load_mesh, sample_surface, umeyama_align)

    t0 = time.perf_counter()
    recon = load_mesh(args.recon)
    ref = load_mesh(args.ref)
    transform = None
    if args.align == "icp":
        cloud = sample_surface(recon, min(args.samples, 20_000), np.random.default_rng(args.seed))
        result = icp_refine(cloud, ref, build_bvh(ref), max_iters=100, trim_fraction=0.1)
        transform = result.transform
    elif args.align.startswith("umeyama:"):
        src, dst = _read_correspondences(args.align.split(":", 1)[1])
        transform = umeyama_align(src, dst, with_scale=True)
    elif args.align != "none":
        raise UsageError(f"--align must be none, icp or umeyama:<file>, got {args.align!r}")
    if transform is not None:
        recon = transform.apply_mesh(recon)

    fits = {"gaussian": ("gaussian",), "weibull": ("weibull",), "both": ("gaussian", "weibull")}[args.fit]
    if args.missing_threshold == "auto":
        thr = default_missing_threshold(ref)
    else:
        try:
            thr = float(args.missing_threshold)
        except ValueError:
            raise UsageError(f"--missing-threshold must be a length or 'auto', got {args.missing_threshold!r}") from None
        if not thr > 0:
            raise UsageError("--missing-threshold must be positive")

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    extra = {
        "recon": str(args.recon), "ref": str(args.ref), "samples": args.samples, "seed": args.seed,
        "alignment": transform.to_dict() if transform is not None else None,
    }
    if args.both_directions:
        rep = bidirectional_report(recon, ref, args.samples, thr, args.seed, args.bins, fits,
                                   normalize=args.normalize_by_diagonal)
        reports = [("recon_to_ref", rep.recon_to_ref), ("ref_to_recon", rep.ref_to_recon)]
        outputs.append(rep.write_json(out_dir / "report.json", extra))
    else:
        cloud = sample_surface(recon, args.samples, args.seed)
        r = c2m_signed(cloud, ref, build_bvh(ref), bins=args.bins, fits=fits,
                       normalize_by=ref.diagonal if args.normalize_by_diagonal else None)
        reports = [("recon_to_ref", r)]
        doc = {"recon->ref": r.to_dict(), **extra}
        path = out_dir / "report.json"
        path.write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n")
        outputs.append(path)
    for tag, r in reports:
        outputs.append(export_heatmap(r.points, r.signed_distances, out_dir / f"heatmap_{tag}.ply"))
        outputs.append(r.dump_histogram(out_dir / f"histogram_{tag}.csv"))
        if args.dump_distances:
            outputs.append(r.dump_distances(out_dir / f"distances_{tag}.csv"))
    config = {k: getattr(args, k) for k in ("recon", "ref", "samples", "both_directions", "align", "fit",
                                           "missing_threshold", "normalize_by_diagonal", "bins")}
    config["missing_threshold_m"] = thr
    _write_manifest(out_dir / "manifest.json", "eval-mesh", argv, config, args.seed, outputs, t0)
    if args.both_directions:
        print(f"flagged fraction (ref->recon > {thr:.4g} m): {rep.coverage['flagged_fraction']:.4f}")
    return EXIT_OK


# -- eval-images ------------------------------------------------------------

def cmd_eval_images(args, argv):
    from .images import batch_eval

    t0 = time.perf_counter()
    result = batch_eval(args.rendered, args.gt, workers=args.workers)
    if not result.rows:
        raise DomainError("every matched pair failed; nothing to report")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    result.write_csv(out)
    config = {"rendered": str(args.rendered), "gt": str(args.gt), **result.summary()}
    _write_manifest(out.with_name(out.stem + ".manifest.json"), "eval-images", argv, config, None, [out], t0)
    print(f"{len(result.rows)} pairs, {len(result.failures)} failure(s), {len(result.unmatched)} unmatched")
    return EXIT_OK


def cmd_replay(args, argv):
    doc = json.loads(Path(args.manifest).read_text())
    return main(doc["argv"])


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rsorecon", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    o = sub.add_parser("gen-orbit", help="write a CW relative trajectory as CSV")
    o.add_argument("--x0", type=_finite, default=40.0, help="initial offset [m] (default 40)")
    o.add_argument("--altitude-km", type=_positive(float), default=500.0)
    o.add_argument("--duration", type=_duration, default="period", help="seconds or 'period'")
    o.add_argument("--dt", type=_positive(float), default=1.0, help="sample spacing [s] (default 1)")
    g = o.add_mutually_exclusive_group()
    g.add_argument("--planar", action="store_true", help="in-plane 2:1 bounded ellipse")
    g.add_argument("--inclined", action="store_true", help="45 degree inclined bounded orbit (default)")
    o.add_argument("--integrator", choices=("closed-form", "rk4"), default="closed-form")
    o.add_argument("--out", default="trajectory.csv")
    o.set_defaults(func=cmd_gen_orbit)

    d = sub.add_parser("gen-dataset", help="write camera transforms + ground truth for a fly-around")
    d.add_argument("--config", help="flat TOML file with scenario keys")
    d.add_argument("--frames", type=_positive(int))
    d.add_argument("--tumble-rate-deg-s", type=float)
    d.add_argument("--tumble-axis", help="x, y, z or 'ax,ay,az'")
    d.add_argument("--fov-deg", type=_positive(float))
    d.add_argument("--width", type=_positive(int))
    d.add_argument("--height", type=_positive(int))
    d.add_argument("--x0", type=_positive(float))
    d.add_argument("--duration", type=_duration)
    d.add_argument("--altitude-km", type=_positive(float))
    d.add_argument("--seed", type=int)
    d.add_argument("--out-dir", default="dataset")
    d.set_defaults(func=cmd_gen_dataset)

    m = sub.add_parser("eval-mesh", help="signed C2M distances between a reconstruction and a reference")
    m.add_argument("--recon", required=True)
    m.add_argument("--ref", required=True)
    m.add_argument("--samples", type=_positive(int), default=100_000)
    m.add_argument("--both-directions", action=argparse.BooleanOptionalAction, default=True)
    m.add_argument("--align", default="none", help="none | icp | umeyama:<csv of src,dst pairs>")
    m.add_argument("--fit", choices=("gaussian", "weibull", "both"), default="both")
    m.add_argument("--missing-threshold", default="auto", help="metres or 'auto' (1%% of ref diagonal)")
    m.add_argument("--normalize-by-diagonal", action="store_true")
    m.add_argument("--bins", type=_positive(int), default=64)
    m.add_argument("--dump-distances", action="store_true")
    m.add_argument("--seed", type=int, default=DEFAULT_SEED)
    m.add_argument("--out-dir", default="mesh_eval")
    m.set_defaults(func=cmd_eval_mesh)

    i = sub.add_parser("eval-images", help="PSNR/SSIM for same-named PNG pairs")
    i.add_argument("--rendered", required=True)
    i.add_argument("--gt", required=True)
    i.add_argument("--out", default="metrics.csv")
    i.add_argument("--workers", type=_positive(int), default=1)
    i.set_defaults(func=cmd_eval_images)

    r = sub.add_parser("replay", help="re-run a command from its manifest")
    r.add_argument("manifest")
    r.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"rsorecon: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, DomainError, GeometryError, ParseError, PropagationError, RankError, OSError) as exc:
        print(f"rsorecon: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
