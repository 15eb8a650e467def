"""Inference-side toolkit: image-stack ingestion, per-pixel map
extraction, the classical least-squares baseline solver, pixelwise
synthetic-sphere rendering, scoring, and test-time rotation averaging.
"""

import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import effects
from .errors import (CountMismatch, DecodeError, DimensionMismatch,
                     EmptyIntersection, LineCountMismatch, OutsideMask,
                     ParseError, PredictorFailure, RankDeficientLights)
from .formats import read_pxnm, write_pxom
from .geom import angular_error, rotate_about_z
from .obsmap import build_map_arrays, cell_of


@dataclass
class ImageStack:
    """J linear-rgb images under known directional lights.

    images: (J, H, W, 3) float in [0, 1] (above 1 only for synthetic
    unquantized data); lights: (J, 3) unit directions; phis: (J, 3)
    per-channel brightness; mask: (H, W) bool.
    """

    images: np.ndarray
    lights: np.ndarray
    phis: np.ndarray
    mask: np.ndarray

    @property
    def j(self):
        return self.images.shape[0]

    @property
    def shape(self):
        return self.images.shape[1:3]


@dataclass
class NormalMap:
    normals: np.ndarray      # (H, W, 3), NaN outside mask
    mask: np.ndarray         # (H, W) bool


def _parse_triplets(path, what):
    rows = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"{path}:{lineno}: expected 3 {what} values, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return np.array(rows, dtype=np.float64)


def load_directions(path):
    """One unit direction per line (three whitespace-separated reals),
    normalized on load."""
    dirs = _parse_triplets(path, "direction")
    if dirs.shape[0] == 0:
        raise ParseError(f"{path}: no lights")
    norms = np.linalg.norm(dirs, axis=1)
    if np.any(norms == 0.0):
        raise ParseError("zero-length light direction")
    return dirs / norms[:, None]


def load_lights(directions_path, intensities_path):
    """DiLiGenT-style light files: one light per line, three
    whitespace-separated reals each.  Directions are normalized on load.
    Returns (directions (J, 3), intensities (J, 3)).
    """
    dirs = load_directions(directions_path)
    ints = _parse_triplets(intensities_path, "intensity")
    if dirs.shape[0] != ints.shape[0]:
        raise LineCountMismatch(
            f"{dirs.shape[0]} directions vs {ints.shape[0]} intensities")
    if np.any(ints <= 0.0):
        raise ParseError("light intensities must be positive")
    return dirs, ints


def read_png(path):
    import cv2
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise DecodeError(f"cannot decode {path}")
    if img.dtype == np.uint8:
        scale = 255.0
    elif img.dtype == np.uint16:
        scale = 65535.0
    else:
        raise DecodeError(f"{path}: unsupported bit depth {img.dtype}")
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    elif img.shape[2] == 4:
        img = img[:, :, :3]
    return img[:, :, ::-1].astype(np.float64) / scale   # BGR -> RGB


def write_png(path, rgb01, bits=16):
    import cv2
    arr = np.clip(np.asarray(rgb01, dtype=np.float64), 0.0, 1.0)
    if bits == 16:
        img = np.round(arr * 65535.0).astype(np.uint16)
    else:
        img = np.round(arr * 255.0).astype(np.uint8)
    if img.ndim == 3:
        img = img[:, :, ::-1]
    cv2.imwrite(str(path), img)


def load_image_stack(directory, lights, intensities, mask=None):
    """Load the lexicographically ordered PNGs of a directory as an
    ImageStack; pixel values map to [0, 1] by the bit-depth maximum.
    """
    directory = Path(directory)
    paths = sorted(directory.glob("*.png"))
    mask_path = directory / "mask.png"
    paths = [p for p in paths if p != mask_path]
    if len(paths) != lights.shape[0]:
        raise CountMismatch(f"{len(paths)} images vs {lights.shape[0]} lights")
    images = []
    for p in paths:
        img = read_png(p)
        if images and img.shape != images[0].shape:
            raise DimensionMismatch(f"{p}: shape {img.shape} != {images[0].shape}")
        images.append(img.astype(np.float32))
    stack = np.stack(images)
    if mask is None:
        if mask_path.exists():
            mask = read_png(mask_path)[:, :, 0] > 0
        else:
            mask = np.ones(stack.shape[1:3], dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != stack.shape[1:3]:
        raise DimensionMismatch(f"mask shape {mask.shape} != image shape {stack.shape[1:3]}")
    return ImageStack(images=stack, lights=lights, phis=intensities, mask=mask)


def save_stack_npz(path, stack):
    """npz with pinned zip timestamps so identical stacks are
    byte-identical on disk (np.savez embeds the current time)."""
    import io
    import zipfile
    from numpy.lib import format as npformat
    arrays = {"images": stack.images, "lights": stack.lights,
              "phis": stack.phis, "mask": stack.mask}
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            buf = io.BytesIO()
            npformat.write_array(buf, np.ascontiguousarray(arr),
                                 allow_pickle=False)
            info = zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, buf.getvalue())


def load_stack_npz(path):
    data = np.load(path)
    return ImageStack(images=data["images"], lights=data["lights"],
                      phis=data["phis"], mask=data["mask"].astype(bool))


def extract_map(stack, pixel, d=32):
    """Observation map of one pixel from all images of the stack."""
    r, c = pixel
    if not stack.mask[r, c]:
        raise OutsideMask(f"pixel {pixel} is outside the mask")
    intensities = stack.images[:, r, c, :].astype(np.float64)
    return build_map_arrays(stack.lights, stack.phis, intensities, d)


def extract_maps(stack, pixels, d=32, theta=0.0):
    """Batched map extraction for (P, 2) pixel coordinates, with an
    optional light-space rotation about z.  Returns (P, d, d, 4) float32.
    """
    pixels = np.asarray(pixels)
    if np.any(~stack.mask[pixels[:, 0], pixels[:, 1]]):
        raise OutsideMask("some pixels are outside the mask")
    dirs = rotate_about_z(stack.lights, theta) if theta else stack.lights
    u, v = cell_of(dirs, d)
    p = pixels.shape[0]
    comp = stack.images[:, pixels[:, 0], pixels[:, 1], :].astype(np.float64) \
        / stack.phis[:, None, :]                       # (J, P, 3)
    gray = comp.sum(axis=2)                            # (J, P)
    maps = np.zeros((p, d, d, 4), dtype=np.float64)
    # light order gives last-writer-wins on cell collisions
    for j in range(stack.j):
        maps[:, u[j], v[j], :3] = comp[j]
        maps[:, u[j], v[j], 3] = gray[j]
    gmax = maps[:, :, :, 3].max(axis=(1, 2))
    nz = gmax > 0
    maps[nz, :, :, 3] /= gmax[nz, None, None]
    return maps.astype(np.float32)


def woodham_solve(stack):
    """Classical least-squares normal recovery on the brightness-
    compensated gray channel (mean of the compensated rgb channels).

    Per masked pixel only observations with positive gray enter the
    solve (a zero observation is a clamped shadow and carries no
    information for the linear model); pixels with fewer than 3 usable
    observations, or a degenerate usable-light system, or all-zero
    intensities are marked invalid in the output mask.
    """
    lights = np.asarray(stack.lights, dtype=np.float64)
    if lights.shape[0] < 3 or np.linalg.matrix_rank(lights) < 3:
        raise RankDeficientLights(
            f"need >= 3 lights of rank 3, got {lights.shape[0]} "
            f"rank {np.linalg.matrix_rank(lights)}")
    h, w = stack.shape
    mask = stack.mask
    pix = np.argwhere(mask)
    comp = stack.images[:, pix[:, 0], pix[:, 1], :].astype(np.float64) \
        / stack.phis[:, None, :]
    gray = comp.mean(axis=2)                          # (J, P)
    weights = (gray > 0.0).astype(np.float64)         # (J, P)

    # weighted normal equations, batched 3x3 per pixel
    lw = lights[:, :, None] * lights[:, None, :]      # (J, 3, 3)
    a = np.einsum("jp,jkl->pkl", weights, lw)         # (P, 3, 3)
    b = np.einsum("jp,jp,jk->pk", weights, gray, lights)  # (P, 3)

    nvalid = weights.sum(axis=0)
    eig = np.linalg.eigvalsh(a)
    solvable = (nvalid >= 3) & (eig[:, 0] > 1e-9 * np.maximum(eig[:, -1], 1e-30))

    normals = np.full((pix.shape[0], 3), np.nan)
    if np.any(solvable):
        sol = np.linalg.solve(a[solvable], b[solvable][..., None])[..., 0]
        norms = np.linalg.norm(sol, axis=1)
        ok = norms > 0
        sol[ok] /= norms[ok, None]
        sol[~ok] = np.nan
        normals[solvable] = sol

    out = np.full((h, w, 3), np.nan)
    out[pix[:, 0], pix[:, 1]] = normals
    out_mask = np.zeros((h, w), dtype=bool)
    valid = solvable & np.all(np.isfinite(normals), axis=1)
    out_mask[pix[valid, 0], pix[valid, 1]] = True
    return NormalMap(normals=out, mask=out_mask)


@dataclass
class RenderEffects:
    """Per-pixel effect toggles for the sphere renderer; magnitudes follow
    the generation hyperparameters."""

    shadows: bool = False
    reflections: bool = False
    ambient: bool = False
    noise: bool = False
    quantize: bool = False
    seed: int = 0
    p_shadow: float = 0.75
    p_zero_height: float = 0.25
    shadow_sigma: float = 2.0
    p_ambient: float = 0.75
    ambient_max: float = 0.01

    @property
    def all_off(self):
        return not (self.shadows or self.reflections or self.ambient or self.noise)


def sphere_normals(resolution):
    """Orthographic sphere geometry: unit normals over the pixel grid and
    the inside-disk mask.  Pixel centers map to x in (-1, 1) left to
    right and y in (-1, 1) bottom to top (row 0 on top).
    """
    r = np.arange(resolution)
    x = (2.0 * r + 1.0 - resolution) / resolution
    xx, yy = np.meshgrid(x, -x, indexing="xy")
    rho2 = xx * xx + yy * yy
    mask = rho2 < 1.0
    z = np.sqrt(np.maximum(0.0, 1.0 - rho2))
    normals = np.stack([xx, yy, z], axis=-1)
    normals[~mask] = np.nan
    return normals, mask


def render_sphere(material, albedo, lights, phis, resolution, fx=None):
    """Pixelwise orthographic sphere render under directional lights.

    Every pixel inside the disk gets its geometric normal; the intensity
    per light comes from the same reflectance composition the generator
    uses, with per-pixel effect sampling controlled by ``fx``
    (all effects off by default).  Returns (ImageStack, ground-truth
    NormalMap).
    """
    fx = fx or RenderEffects()
    lights = np.asarray(lights, dtype=np.float64)
    phis = np.asarray(phis, dtype=np.float64)
    j = lights.shape[0]
    normals, mask = sphere_normals(resolution)
    images = np.zeros((j, resolution, resolution, 3), dtype=np.float64)
    albedo = np.asarray(albedo, dtype=np.float64)

    pix = np.argwhere(mask)
    noise_id = effects.NoiseDraws.identity()
    empty = effects.empty_wall()
    for idx, (r, c) in enumerate(pix):
        n = normals[r, c]
        if fx.all_off and not fx.quantize:
            wall, refl, ambient, noise = empty, effects.EMPTY_REFLECTIONS, 0.0, noise_id
        else:
            rng = np.random.default_rng([fx.seed, int(idx)])
            wall = effects.sample_shadow_wall(
                rng, 1.0 - fx.p_shadow, fx.p_zero_height, fx.shadow_sigma) \
                if fx.shadows else empty
            refl = effects.sample_reflections(rng, wall) if fx.reflections \
                else effects.EMPTY_REFLECTIONS
            if fx.ambient and rng.uniform() < fx.p_ambient:
                ambient = albedo * n[2] * rng.uniform(0.0, fx.ambient_max)
            else:
                ambient = 0.0
            noise = effects.NoiseDraws.sample(rng, (j, 3)) if fx.noise else noise_id
        r_t = effects.record_reflectance(n[None, :], albedo[None, :],
                                         lights, wall, refl, material)
        images[:, r, c, :] = effects.compose_intensity(
            r_t, ambient, phis, noise, quantize=fx.quantize)

    gt = NormalMap(normals=normals, mask=mask)
    stack = ImageStack(images=images, lights=lights, phis=phis, mask=mask)
    return stack, gt


@dataclass
class EvalResult:
    mae_deg: float
    error_map: np.ndarray          # (H, W) degrees, NaN outside
    percentiles: dict
    n_pixels: int

    def csv_rows(self):
        rows = [("mae_deg", self.mae_deg), ("n_pixels", self.n_pixels)]
        rows += [(f"p{int(q)}_deg", v) for q, v in self.percentiles.items()]
        return rows


def evaluate(pred, truth, percentiles=(50, 75, 90, 95, 99)):
    """Mean angular error in degrees over the intersected masks, plus the
    per-pixel error map and a percentile table."""
    if pred.normals.shape != truth.normals.shape:
        raise DimensionMismatch(
            f"prediction {pred.normals.shape} vs truth {truth.normals.shape}")
    both = pred.mask & truth.mask
    if not np.any(both):
        raise EmptyIntersection("prediction and truth masks do not overlap")
    errs = angular_error(pred.normals[both], truth.normals[both])
    error_map = np.full(both.shape, np.nan)
    error_map[both] = errs
    table = {float(q): float(np.percentile(errs, q)) for q in percentiles}
    return EvalResult(mae_deg=float(errs.mean()), error_map=error_map,
                      percentiles=table, n_pixels=int(both.sum()))


class SubprocessPredictor:
    """Predictor-exchange adapter: maps go out as a PXOM file (normals
    zero-filled), the command runs with the input and output paths
    appended, and the predictions come back as a 1 x P PXNM file in
    record order.
    """

    def __init__(self, command):
        self.command = list(command)

    def __call__(self, maps):
        maps = np.asarray(maps, dtype=np.float32)
        p = maps.shape[0]
        with tempfile.TemporaryDirectory(prefix="pixelps-predict-") as tmp:
            in_path = Path(tmp) / "maps.pxom"
            out_path = Path(tmp) / "normals.pxnm"
            write_pxom(in_path, maps, np.zeros((p, 3), dtype=np.float32))
            proc = subprocess.run(self.command + [str(in_path), str(out_path)],
                                  capture_output=True, text=True)
            if proc.returncode != 0:
                raise PredictorFailure(
                    f"predictor exited {proc.returncode}: {proc.stderr.strip()[:500]}")
            if not out_path.exists():
                raise PredictorFailure("predictor produced no output file")
            normals, _ = read_pxnm(out_path)
        normals = normals.reshape(-1, 3)
        if normals.shape[0] != p:
            raise PredictorFailure(
                f"predictor returned {normals.shape[0]} normals for {p} maps")
        return normals.astype(np.float64)


def k_rotation_predict(stack, k, predictor, d=32, batch=8192):
    """Test-time rotation averaging: predict normals on maps rotated by
    2*pi*i/k about z for i in 0..k-1, rotate each prediction back, and
    average per pixel (renormalized).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    pixels = np.argwhere(stack.mask)
    p = pixels.shape[0]
    acc = np.zeros((p, 3))
    for i in range(k):
        theta = 2.0 * np.pi * i / k
        preds = np.empty((p, 3))
        for start in range(0, p, batch):
            sel = pixels[start:start + batch]
            maps = extract_maps(stack, sel, d=d, theta=theta)
            try:
                out = np.asarray(predictor(maps), dtype=np.float64)
            except PredictorFailure:
                raise
            except Exception as exc:
                raise PredictorFailure(f"predictor raised: {exc}") from exc
            if out.shape != (sel.shape[0], 3):
                raise PredictorFailure(
                    f"predictor returned shape {out.shape}, expected {(sel.shape[0], 3)}")
            preds[start:start + batch] = out
        acc += rotate_about_z(preds, -theta)
    norms = np.linalg.norm(acc, axis=1)
    ok = norms > 0
    acc[ok] /= norms[ok, None]
    acc[~ok] = np.array([0.0, 0.0, 1.0])

    normals = np.full(stack.mask.shape + (3,), np.nan)
    normals[pixels[:, 0], pixels[:, 1]] = acc
    return NormalMap(normals=normals, mask=stack.mask.copy())


def sample_light_subsets(total, k=10, n_subsets=10, seed=20231):
    """Seeded random light subsets for sparse-light evaluation runs.

    Returns a (n_subsets, k) index array; the default seed is part of
    the documented protocol so runs are repeatable.
    """
    rng = np.random.default_rng(seed)
    return np.stack([rng.choice(total, size=k, replace=False)
                     for _ in range(n_subsets)])


def subset_stack(stack, indices):
    """Restrict a stack to a subset of its lights."""
    idx = np.asarray(indices)
    return ImageStack(images=stack.images[idx], lights=stack.lights[idx],
                      phis=stack.phis[idx], mask=stack.mask)
