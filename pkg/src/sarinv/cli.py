"""Command-line entry points: simulate, reconstruct, render, eval, plot.

Every subcommand is deterministic given its flags and seeds. Errors in
configuration, geometry or input files exit with status 2; success writes
all outputs and exits 0.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys

import numpy as np

from . import io as sario
from .errors import SarinvError
from .geometry import ViewConfig
from .metrics import altitude_mae, altitude_median, altitude_rmse
from .optimize import RunConfig, fit
from .renderer import SarImage, render_image
from .scene import DsmSurface
from .speckle import NoiseConfig, apply_speckle

DEFAULT_HEADINGS_DEG = (0.0, 72.0, 144.0, 216.0, 288.0)
DEFAULT_INCIDENCE_DEG = 45.0


def default_views(n_planes=64, n_range_bins=256, n_rays=256):
    """The standard five-view acquisition: headings every 72 degrees, 45 degree incidence."""
    return [
        ViewConfig.for_scene(
            azimuth_heading=math.radians(h),
            incidence=math.radians(DEFAULT_INCIDENCE_DEG),
            n_planes=n_planes,
            n_range_bins=n_range_bins,
            n_rays=n_rays,
        )
        for h in DEFAULT_HEADINGS_DEG
    ]


def _load_surface(path):
    raster = sario.read_raster(path)
    if raster.kind != sario.KIND_DSM:
        raise ValueError(f"{path}: raster kind {raster.kind} is not a DSM")
    heights = raster.data.astype(np.float64)
    if heights.min() < 0.0 or heights.max() > 1.0:
        raise ValueError(f"{path}: DSM heights must lie in [0, 1]")
    return DsmSurface(heights=heights)


def _resolve_scene(args):
    """--scene takes a generator name or a path to an RDF1 DSM."""
    name = args.scene
    if os.path.exists(name):
        return _load_surface(name), None, os.path.basename(name)
    surface, theta = sario.make_scene(name, size=args.size)
    return surface, theta, name


def _view_tag(k):
    return f"view{k:02d}"


def _cmd_simulate(args):
    surface, theta, scene_name = _resolve_scene(args)

    if args.views:
        full = sario.read_config(args.views)
        views = full.views
        noise = full.noise
    else:
        views = default_views()
        noise = NoiseConfig()
    if not views:
        print("error: no views configured", file=sys.stderr)
        return 2
    if args.seed is not None:
        noise = NoiseConfig(seed=args.seed, looks=noise.looks)

    os.makedirs(args.out, exist_ok=True)
    sario.write_raster(os.path.join(args.out, "dsm_truth.rdf"),
                       surface.heights, sario.KIND_DSM)
    if theta is not None:
        sario.write_raster(os.path.join(args.out, "theta_truth.rdf"),
                           theta, sario.KIND_THETA)

    for k, view in enumerate(views):
        clean = render_image(surface, theta, 0.05, view, jitter=False)
        noisy = apply_speckle(clean, noise, stream=k)
        tag = _view_tag(k)
        sario.write_raster(os.path.join(args.out, f"{tag}_clean.rdf"),
                           clean.amplitudes, sario.KIND_SAR)
        sario.write_raster(os.path.join(args.out, f"{tag}_speckled.rdf"),
                           noisy.amplitudes, sario.KIND_SAR)

    manifest = sario.FullConfig(
        run=RunConfig(grid_size=surface.heights.shape[1]),
        views=views,
        noise=noise,
        scene=scene_name,
        scene_size=surface.heights.shape[1],
    )
    sario.write_config(os.path.join(args.out, "manifest.cfg"), manifest)
    print(f"wrote {2 * len(views) + 1 + (theta is not None)} rasters to {args.out}")
    return 0


def _load_data_dir(data_dir, use_clean=False):
    manifest_path = os.path.join(data_dir, "manifest.cfg")
    if not os.path.exists(manifest_path):
        raise ValueError(f"{data_dir}: no manifest.cfg (not a simulate output?)")
    manifest = sario.read_config(manifest_path)
    if not manifest.views:
        raise ValueError(f"{manifest_path}: manifest has no views")
    suffix = "_clean.rdf" if use_clean else "_speckled.rdf"
    images = []
    for k, view in enumerate(manifest.views):
        path = os.path.join(data_dir, _view_tag(k) + suffix)
        raster = sario.read_raster(path)
        images.append(SarImage(amplitudes=raster.data.astype(np.float64),
                               view=view, noisy=not use_clean))
    return manifest, images


def _cmd_reconstruct(args):
    manifest, images = _load_data_dir(args.data, use_clean=args.use_clean)

    if args.config:
        run_cfg = sario.read_config(args.config).run
    else:
        run_cfg = RunConfig(grid_size=manifest.scene_size)
    if run_cfg.checkpoint_every > 0 or args.resume:
        run_cfg = dataclasses.replace(run_cfg, out_dir=args.out)

    truth = None
    truth_path = args.truth or os.path.join(args.data, "dsm_truth.rdf")
    if os.path.exists(truth_path):
        truth = _load_surface(truth_path)

    state = None
    if args.resume:
        ckpt = sario.checkpoint_path(args.out)
        if not os.path.exists(ckpt):
            print(f"error: no checkpoint at {ckpt}", file=sys.stderr)
            return 2
        state, stored_cfg = sario.read_checkpoint(ckpt)
        # steps may grow on resume (the first N steps of a run do not
        # depend on the horizon) except under annealing, where the beta
        # schedule is normalized by the total step count
        comparable = dataclasses.replace(stored_cfg, steps=run_cfg.steps,
                                         out_dir=run_cfg.out_dir)
        if comparable != run_cfg or (
            run_cfg.beta_mode == "anneal" and stored_cfg.steps != run_cfg.steps
        ):
            print("error: checkpoint was written with a different run config",
                  file=sys.stderr)
            return 2

    os.makedirs(args.out, exist_ok=True)
    surface, spec_map, beta, report = fit(
        images, manifest.views, run_cfg, truth=truth, state=state,
        quiet=args.quiet,
    )

    sario.write_raster(os.path.join(args.out, "recovered_dsm.rdf"),
                       surface.heights, sario.KIND_DSM)
    sario.write_raster(os.path.join(args.out, "recovered_theta.rdf"),
                       spec_map.theta, sario.KIND_THETA)
    sario.write_report(os.path.join(args.out, "report.txt"), report)
    sario.write_loss_curve(os.path.join(args.out, "loss_curve.txt"),
                           report["loss_history"])
    if "altitude_rmse" in report:
        print(f"altitude_rmse={report['altitude_rmse']!r}")
    return 0


def _cmd_render(args):
    surface = _load_surface(args.dsm)
    theta = None
    if args.theta:
        raster = sario.read_raster(args.theta)
        if raster.kind != sario.KIND_THETA:
            raise ValueError(f"{args.theta}: raster kind is not a theta map")
        theta = raster.data.astype(np.float64)
    full = sario.read_config(args.views)
    if not full.views:
        print("error: no views configured", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    for k, view in enumerate(full.views):
        clean = render_image(surface, theta, args.beta, view, jitter=False)
        sario.write_raster(os.path.join(args.out, f"{_view_tag(k)}_clean.rdf"),
                           clean.amplitudes, sario.KIND_SAR)
    print(f"wrote {len(full.views)} rasters to {args.out}")
    return 0


def _cmd_eval(args):
    recovered = _load_surface(args.recovered)
    truth = _load_surface(args.truth)
    print(f"altitude_rmse={altitude_rmse(recovered, truth)!r}")
    print(f"altitude_mae={altitude_mae(recovered, truth)!r}")
    print(f"altitude_median={altitude_median(recovered, truth)!r}")
    return 0


def _to_gray(data, log_scale):
    x = data.astype(np.float64)
    if log_scale:
        floor = 1e-6 * float(x.max()) if x.max() > 0 else 1e-12
        x = np.log10(x + floor)
    lo, hi = float(x.min()), float(x.max())
    if hi > lo:
        y = (x - lo) / (hi - lo)
    else:
        y = np.full_like(x, 0.5)
    return np.round(y * 255.0).astype(np.uint8)


def _cmd_plot(args):
    from PIL import Image

    raster = sario.read_raster(args.infile)
    gray = _to_gray(raster.data, args.log)
    Image.fromarray(gray, mode="L").save(args.out)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sarinv",
        description="Differentiable SAR rendering and surface recovery.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize clean + speckled SAR views")
    p.add_argument("--scene", required=True,
                   help="scene name (pyramid, round_pile, fuji, fournaise-like, "
                        "two_region) or path to an RDF1 DSM")
    p.add_argument("--size", type=int, default=64, help="generated DSM size")
    p.add_argument("--views", help="config file with view.* entries "
                                   "(default: five views, 72 degree spacing)")
    p.add_argument("--seed", type=int, default=None, help="speckle seed override")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("reconstruct", help="recover a surface from SAR views")
    p.add_argument("--data", required=True, help="simulate output directory")
    p.add_argument("--config", help="run config file (default: standard protocol)")
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="DSM for final metrics "
                                   "(default: dsm_truth.rdf in --data if present)")
    p.add_argument("--use-clean", action="store_true",
                   help="train on the noiseless images")
    p.add_argument("--resume", action="store_true",
                   help="continue from --out/checkpoint.npz")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("render", help="noiseless forward renders of a DSM")
    p.add_argument("--dsm", required=True)
    p.add_argument("--theta", help="optional RDF1 specularity map")
    p.add_argument("--beta", type=float, default=0.05)
    p.add_argument("--views", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("eval", help="compare a recovered DSM against truth")
    p.add_argument("--recovered", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("plot", help="export a raster as an 8-bit grayscale image")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log", action="store_true", help="logarithmic scaling")
    p.set_defaults(func=_cmd_plot)

    return parser


def _configure_threads():
    value = os.environ.get("SARINV_THREADS")
    if not value:
        return
    try:
        import numba

        numba.set_num_threads(max(1, int(value)))
    except (ValueError, RuntimeError):
        pass


def main(argv=None):
    args = build_parser().parse_args(argv)
    _configure_threads()
    try:
        return args.func(args)
    except (SarinvError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
