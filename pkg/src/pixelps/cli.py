"""Command-line surface: generation, rendering, solving, extraction and
evaluation as composable subcommands.

Exit codes: 0 success, 1 data/I-O failure (one-line diagnostic on
stderr), 2 usage error.
"""

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import pstereo
from .brdf import (LAMBERTIAN, DisneyMaterial, DisneyParams, MerlMixMaterial,
                   load_merl, merl_library_from_env)
from .datagen import GenConfig, generate
from .errors import PixelPSError
from .formats import pxom_info, read_pxnm, read_pxom, write_pxnm, write_pxom
from .geom import angular_error


def _positive_int(value):
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def _rgb(value):
    parts = [float(p) for p in value.split(",")]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected r,g,b, got {value!r}")
    return np.array(parts)


def _add_generate(sub):
    p = sub.add_parser("generate", help="generate a PXOM training dataset")
    p.add_argument("--preset", choices=["dense", "sparse"], default="dense",
                   help="light configuration: dense 50-1000 lights to 70 deg, "
                        "sparse 10 lights to 45 deg (default dense)")
    p.add_argument("--count", type=_positive_int, required=True,
                   help="number of records to emit")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--out", required=True, help="output PXOM path")
    p.add_argument("--workers", type=_positive_int, default=os.cpu_count() or 1,
                   help="worker processes (default: hardware parallelism); "
                        "output bytes do not depend on this")
    p.add_argument("--config", help="flat key=value config file; flags override")
    p.add_argument("--d", type=int, help="observation-map side (default 32)")
    p.add_argument("--merl-dir",
                   help="directory of MERL .binary tables "
                        "(default: $PIXELPS_MERL_DIR)")
    p.add_argument("--stats-out", help="write generation statistics CSV here")
    p.set_defaults(func=cmd_generate)


def cmd_generate(args):
    if args.config:
        cfg = GenConfig.from_file(args.config)
        if args.preset == "sparse":
            cfg.lights_min = cfg.lights_max = 10
            cfg.light_max_elevation_deg = 45.0
    else:
        cfg = GenConfig.dense() if args.preset == "dense" else GenConfig.sparse()
    cfg.seed = args.seed
    if args.d:
        cfg.d = args.d
    cfg.validate()
    library = merl_library_from_env(args.merl_dir)
    tables = library.load_all() if len(library) else []
    stats = generate(cfg, args.count, workers=args.workers, sink=args.out,
                     tables=tables)
    print(f"wrote {args.count} records to {args.out} "
          f"({stats.records_per_s:.0f} records/s, {stats.discarded} discards)")
    print(f"fractions: merl {stats.frac_merl:.3f}  ambient {stats.frac_ambient:.3f}  "
          f"discontinuity {stats.frac_discontinuity:.3f}  "
          f"empty-wall {stats.frac_empty_wall:.3f}")
    if args.stats_out:
        with open(args.stats_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value"])
            for key in ("generated", "discarded", "frac_merl", "frac_ambient",
                        "frac_discontinuity", "frac_shadowed", "frac_empty_wall",
                        "elapsed_s", "records_per_s"):
                writer.writerow([key, getattr(stats, key)])
    return 0


def _add_render_sphere(sub):
    p = sub.add_parser("render-sphere",
                       help="render a synthetic sphere stack plus ground truth")
    p.add_argument("--resolution", type=_positive_int, default=128)
    p.add_argument("--material", default="lambertian",
                   help="lambertian | disney[:m,s,r,st,sh,sht,cc,ccr] | merl:NAME")
    p.add_argument("--albedo", type=_rgb, default="0.7",
                   help="r,g,b in [0,1] (default 0.7 gray)")
    p.add_argument("--lights-file", help="light_directions.txt to reuse")
    p.add_argument("--intensities-file", help="light_intensities.txt to reuse")
    p.add_argument("--random-lights", type=_positive_int, default=96,
                   help="number of random lights when no lights file is given")
    p.add_argument("--max-elevation-deg", type=float, default=70.0)
    p.add_argument("--uniform-brightness", action="store_true",
                   help="use brightness 1 for all lights instead of the 0.28-3.2 range")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=["png", "npz"], default="png",
                   help="png: 16-bit images + light files; npz: lossless float stack")
    p.add_argument("--effects", default="",
                   help="comma list from shadows,reflections,ambient,noise")
    p.add_argument("--quantize", action="store_true", help="apply 16-bit quantization")
    p.set_defaults(func=cmd_render_sphere)


def _parse_material(spec, merl_dir=None):
    if spec == "lambertian":
        return LAMBERTIAN
    if spec.startswith("disney"):
        if ":" in spec:
            vals = [float(x) for x in spec.split(":", 1)[1].split(",")]
            return DisneyMaterial(DisneyParams(*vals))
        return DisneyMaterial(DisneyParams())
    if spec.startswith("merl:"):
        name = spec.split(":", 1)[1]
        library = merl_library_from_env(merl_dir)
        return MerlMixMaterial(table=library.resolve(name), weight=1.0)
    raise PixelPSError(f"unknown material spec {spec!r}")


def cmd_render_sphere(args):
    rng = np.random.default_rng(args.seed)
    if args.lights_file:
        if args.intensities_file:
            lights, phis = pstereo.load_lights(args.lights_file,
                                               args.intensities_file)
        else:
            lights = pstereo.load_directions(args.lights_file)
            phis = np.ones_like(lights)
    else:
        from .geom import sample_hemisphere_uniform
        lights = sample_hemisphere_uniform(
            rng, np.radians(args.max_elevation_deg), size=args.random_lights)
        if args.uniform_brightness:
            phis = np.ones((args.random_lights, 3))
        else:
            phis = rng.uniform(0.28, 3.2, (args.random_lights, 3))
    onoff = {name for name in args.effects.split(",") if name}
    unknown = onoff - {"shadows", "reflections", "ambient", "noise"}
    if unknown:
        raise PixelPSError(f"unknown effects: {sorted(unknown)}")
    fx = pstereo.RenderEffects(shadows="shadows" in onoff,
                               reflections="reflections" in onoff,
                               ambient="ambient" in onoff,
                               noise="noise" in onoff,
                               quantize=args.quantize, seed=args.seed)
    material = _parse_material(args.material)
    stack, gt = pstereo.render_sphere(material, args.albedo, lights, phis,
                                      args.resolution, fx)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "npz":
        pstereo.save_stack_npz(out / "stack.npz", stack)
    else:
        for j in range(stack.j):
            pstereo.write_png(out / f"{j:03d}.png", stack.images[j], bits=16)
        pstereo.write_png(out / "mask.png",
                           stack.mask.astype(np.float64), bits=8)
        np.savetxt(out / "light_directions.txt", stack.lights, fmt="%.8f")
        np.savetxt(out / "light_intensities.txt", stack.phis, fmt="%.8f")
    write_pxnm(out / "gt_normals.pxnm", gt.normals, gt.mask)
    print(f"rendered {stack.j} images at {args.resolution}x{args.resolution} to {out}")
    return 0


def _load_stack_arg(stack_dir, lights_file=None, intensities_file=None, mask_file=None):
    stack_dir = Path(stack_dir)
    npz = stack_dir / "stack.npz"
    if stack_dir.suffix == ".npz":
        return pstereo.load_stack_npz(stack_dir)
    if npz.exists():
        return pstereo.load_stack_npz(npz)
    lights, phis = pstereo.load_lights(
        lights_file or stack_dir / "light_directions.txt",
        intensities_file or stack_dir / "light_intensities.txt")
    mask = None
    if mask_file:
        mask = pstereo.read_png(mask_file)[:, :, 0] > 0
    return pstereo.load_image_stack(stack_dir, lights, phis, mask)


def _add_solve(sub):
    p = sub.add_parser("solve-baseline",
                       help="least-squares baseline normals from a stack")
    p.add_argument("--stack", required=True,
                   help="stack directory (PNGs + light files or stack.npz) or .npz path")
    p.add_argument("--lights", help="light_directions.txt override")
    p.add_argument("--intensities", help="light_intensities.txt override")
    p.add_argument("--mask", help="mask PNG override")
    p.add_argument("--out", required=True, help="output PXNM path")
    p.set_defaults(func=cmd_solve)


def cmd_solve(args):
    stack = _load_stack_arg(args.stack, args.lights, args.intensities, args.mask)
    nm = pstereo.woodham_solve(stack)
    write_pxnm(args.out, nm.normals, nm.mask)
    print(f"solved {int(nm.mask.sum())} pixels -> {args.out}")
    return 0


def _add_extract(sub):
    p = sub.add_parser("extract-maps",
                       help="extract per-pixel observation maps to a PXOM file")
    p.add_argument("--stack", required=True)
    p.add_argument("--lights", help="light_directions.txt override")
    p.add_argument("--intensities", help="light_intensities.txt override")
    p.add_argument("--mask", help="mask PNG override")
    p.add_argument("--pixels", help='semicolon list "r,c;r,c"; default: all masked pixels')
    p.add_argument("--d", type=_positive_int, default=32)
    p.add_argument("--rotate-deg", type=float, default=0.0,
                   help="light-space rotation about z before gridding")
    p.add_argument("--out", required=True, help="output PXOM path")
    p.set_defaults(func=cmd_extract)


def cmd_extract(args):
    stack = _load_stack_arg(args.stack, args.lights, args.intensities, args.mask)
    if args.pixels:
        pixels = np.array([[int(x) for x in pair.split(",")]
                           for pair in args.pixels.split(";") if pair])
    else:
        pixels = np.argwhere(stack.mask)
    maps = pstereo.extract_maps(stack, pixels, d=args.d,
                                theta=np.radians(args.rotate_deg))
    write_pxom(args.out, maps, np.zeros((maps.shape[0], 3), dtype=np.float32))
    print(f"extracted {maps.shape[0]} maps (d={args.d}) -> {args.out}")
    return 0


_HEAT_STOPS = np.array([
    [0.0, 0.0, 0.0],
    [0.2, 0.0, 0.6],
    [0.8, 0.1, 0.1],
    [1.0, 0.6, 0.0],
    [1.0, 1.0, 0.2],
])


def _heatmap(err_deg, vmax=90.0):
    """8-bit heat image on a fixed 0..vmax degree scale; NaN maps to black."""
    x = np.clip(np.nan_to_num(err_deg, nan=0.0) / vmax, 0.0, 1.0)
    pos = x * (len(_HEAT_STOPS) - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, len(_HEAT_STOPS) - 1)
    frac = (pos - lo)[..., None]
    rgb = _HEAT_STOPS[lo] * (1 - frac) + _HEAT_STOPS[hi] * frac
    rgb[~np.isfinite(err_deg)] = 0.0
    return rgb


def _add_evaluate(sub):
    p = sub.add_parser("evaluate", help="score a predicted normal map")
    p.add_argument("pred", help="predicted PXNM")
    p.add_argument("truth", help="ground-truth PXNM")
    p.add_argument("--out-prefix",
                   help="write <prefix>_metrics.csv, <prefix>_errors.csv "
                        "and <prefix>_errmap.png")
    p.set_defaults(func=cmd_evaluate)


def cmd_evaluate(args):
    pred_n, pred_m = read_pxnm(args.pred)
    truth_n, truth_m = read_pxnm(args.truth)
    result = pstereo.evaluate(pstereo.NormalMap(pred_n, pred_m),
                              pstereo.NormalMap(truth_n, truth_m))
    print(f"MAE {result.mae_deg:.3f} deg over {result.n_pixels} pixels")
    for q, v in result.percentiles.items():
        print(f"  p{int(q)}: {v:.3f} deg")
    if args.out_prefix:
        prefix = args.out_prefix
        with open(f"{prefix}_metrics.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value"])
            writer.writerows(result.csv_rows())
        np.savetxt(f"{prefix}_errors.csv", result.error_map, delimiter=",", fmt="%.5f")
        pstereo.write_png(f"{prefix}_errmap.png", _heatmap(result.error_map), bits=8)
    return 0


def _add_merl_info(sub):
    p = sub.add_parser("merl-info", help="summarize a MERL .binary table")
    p.add_argument("table", help="path to a MERL .binary file")
    p.set_defaults(func=cmd_merl_info)


def cmd_merl_info(args):
    table = load_merl(args.table)
    print(f"table {table.name}: dims {table.data.shape[1:]} per channel")
    for c, name in enumerate("rgb"):
        ch = table.data[c]
        neg = float((ch < 0).mean() * 100.0)
        print(f"  {name}: min {ch.min():.6g}  max {ch.max():.6g}  "
              f"invalid bins {neg:.2f}%")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pixelps",
        description="Observation-map training-data generation and "
                    "photometric-stereo toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate(sub)
    _add_render_sphere(sub)
    _add_solve(sub)
    _add_extract(sub)
    _add_evaluate(sub)
    _add_merl_info(sub)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PixelPSError as exc:
        print(f"pixelps: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"pixelps: i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
