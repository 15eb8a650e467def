"""Approximated global-illumination and sensor effects for a single pixel.

Cast shadows come from a circular occluding wall of radius 1 around the
pixel, described by interpolated height knots over azimuth.  Self
reflections are single-bounce contributions from sampled directions that
the wall occludes.  Discontinuity mixing averages sub-pixel reflectances.
The composition step applies brightness, four noise components and
16-bit quantization.
"""

from dataclasses import dataclass

import numpy as np

from .brdf import eval_material
from .geom import VIEW, sample_hemisphere_uniform

QUANT_MAX = 65535.0 / 65536.0


@dataclass(frozen=True)
class ShadowWall:
    """Wall heights at equally spaced azimuth knots (periodic, radius 1).

    The height continuum is linear interpolation in azimuth between
    knots.  All-zero heights mean an empty wall (nothing shaded).
    """

    heights: np.ndarray

    @property
    def is_empty(self):
        return bool(np.all(self.heights == 0.0))


def empty_wall(knots=20):
    return ShadowWall(np.zeros(knots))


def sample_shadow_wall(rng, p_empty=0.25, p_zero_height=0.25, sigma=2.0, knots=20):
    """Draw a wall: empty with probability p_empty, otherwise half-normal
    heights |N(0, sigma)| per knot, each independently zeroed with
    probability p_zero_height.
    """
    if rng.uniform() < p_empty:
        return empty_wall(knots)
    heights = np.abs(rng.normal(0.0, sigma, knots))
    heights[rng.uniform(size=knots) < p_zero_height] = 0.0
    return ShadowWall(heights)


def wall_height_at(wall, azimuth):
    """Interpolated wall height at azimuth(s) in radians."""
    heights = wall.heights
    knots = len(heights)
    pos = np.mod(np.asarray(azimuth, dtype=np.float64), 2.0 * np.pi) / (2.0 * np.pi) * knots
    k0 = np.floor(pos).astype(np.int64) % knots
    frac = pos - np.floor(pos)
    k1 = (k0 + 1) % knots
    return heights[k0] * (1.0 - frac) + heights[k1] * frac


def is_shaded(wall, l):
    """True where the ray from the pixel in direction l intersects the wall.

    A ray hits the radius-1 wall at height l.z / s where s is the
    direction's horizontal norm, so it is blocked iff l.z < s * h
    (strict: the boundary ray is unshaded; (0,0,1) is never shaded).
    """
    l = np.asarray(l, dtype=np.float64)
    s = np.hypot(l[..., 0], l[..., 1])
    az = np.arctan2(l[..., 1], l[..., 0])
    h = wall_height_at(wall, az)
    return l[..., 2] < s * h


@dataclass(frozen=True)
class ReflectionSet:
    """Up to five single-bounce reflection entries.

    Every direction satisfies is_shaded(wall, direction); normals and
    albedos are independently sampled per entry, the material is shared
    with the main pixel.
    """

    directions: np.ndarray   # (R, 3)
    normals: np.ndarray      # (R, 3)
    albedos: np.ndarray      # (R, 3)

    def __len__(self):
        return self.directions.shape[0]


EMPTY_REFLECTIONS = ReflectionSet(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 3)))


def sample_reflections(rng, wall, max_candidates=5):
    """Draw candidate directions uniform on the full upper hemisphere and
    keep those the wall occludes; each kept entry gets an independent
    hemisphere normal and uniform [0,1] rgb albedo.
    """
    candidates = sample_hemisphere_uniform(rng, np.pi / 2, size=max_candidates)
    keep = is_shaded(wall, candidates)
    kept = candidates[keep]
    r = kept.shape[0]
    if r == 0:
        return EMPTY_REFLECTIONS
    normals = sample_hemisphere_uniform(rng, np.pi / 2, size=r)
    albedos = rng.uniform(0.0, 1.0, (r, 3))
    return ReflectionSet(kept, normals, albedos)


def self_reflection(n, l, refl, albedo, material):
    """Single-bounce reflected radiance for light direction(s) l.

    Sum over entries (skipping any whose direction equals l exactly) of
    B(n_r, l, dir_r) * B(n, dir_r, view), channel-wise; the reflection
    direction acts as the view vector of the bounce point and as the
    light vector of the main pixel.
    """
    l = np.asarray(l, dtype=np.float64)
    out = np.zeros(l.shape[:-1] + (3,))
    for r in range(len(refl)):
        d = refl.directions[r]
        bounce = eval_material(refl.normals[r], l, d, refl.albedos[r], material)
        main = eval_material(n, d, VIEW, albedo, material)
        same = np.all(l == d, axis=-1)
        out += np.where(same[..., None], 0.0, bounce * main)
    return out


def total_reflectance(normals, albedos, l, wall, refl, material):
    """Average over sub-pixels of shadow-gated direct reflectance plus
    self reflection: mean_k of r_d(n_k) * S(l) + r_r(n_k).
    """
    normals = np.atleast_2d(np.asarray(normals, dtype=np.float64))
    albedos = np.atleast_2d(np.asarray(albedos, dtype=np.float64))
    l = np.asarray(l, dtype=np.float64)
    t = normals.shape[0]
    unshaded = (~is_shaded(wall, l)).astype(np.float64)[..., None]
    acc = np.zeros(l.shape[:-1] + (3,))
    for k in range(t):
        direct = eval_material(normals[k], l, VIEW, albedos[k], material)
        acc += direct * unshaded
        if len(refl):
            acc += self_reflection(normals[k], l, refl, albedos[k], material)
    return acc / t


def record_reflectance(normals, albedos, lights, wall, refl, material):
    """Fused equivalent of total_reflectance over a whole light set.

    Hot path for generation: one evaluator call covers all sub-pixel
    direct terms, one covers all bounce factors (which do not depend on
    the sub-pixel), one covers all main factors.  Numerically equal to
    composing total_reflectance / self_reflection per light.
    """
    normals = np.atleast_2d(np.asarray(normals, dtype=np.float64))
    albedos = np.atleast_2d(np.asarray(albedos, dtype=np.float64))
    lights = np.asarray(lights, dtype=np.float64)
    unshaded = (~is_shaded(wall, lights)).astype(np.float64)[:, None]
    direct = eval_material(normals[:, None, :], lights[None, :, :], VIEW,
                           albedos[:, None, :], material)          # (t, J, 3)
    acc = direct * unshaded
    if len(refl):
        bounce = eval_material(refl.normals[:, None, :], lights[None, :, :],
                               refl.directions[:, None, :],
                               refl.albedos[:, None, :], material)  # (R, J, 3)
        same = np.all(lights[None, :, :] == refl.directions[:, None, :], axis=-1)
        bounce = np.where(same[..., None], 0.0, bounce)
        main = eval_material(normals[:, None, :], refl.directions[None, :, :],
                             VIEW, albedos[:, None, :], material)   # (t, R, 3)
        acc = acc + np.einsum("rjc,krc->kjc", bounce, main)
    return acc.mean(axis=0)


def quantize16(x):
    """16-bit sensor discretization: clamp to [0, 65535/65536] then floor
    to the grid of multiples of 2^-16.  Idempotent and monotone.
    """
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, QUANT_MAX)
    return np.floor(x * 65536.0) / 65536.0


@dataclass(frozen=True)
class NoiseDraws:
    """Per-light, per-channel noise: multiplicative uniform and Gaussian,
    additive uniform and Gaussian."""

    mu: np.ndarray
    mg: np.ndarray
    au: np.ndarray
    ag: np.ndarray

    @classmethod
    def identity(cls):
        return cls(np.float64(1.0), np.float64(1.0), np.float64(0.0), np.float64(0.0))

    @classmethod
    def sample(cls, rng, shape, mu_lo=0.95, mu_hi=1.05, mg_std=1e-3,
               au_mag=1e-4, ag_std=1e-4):
        return cls(
            mu=rng.uniform(mu_lo, mu_hi, shape),
            mg=rng.normal(1.0, mg_std, shape),
            au=rng.uniform(-au_mag, au_mag, shape),
            ag=rng.normal(0.0, ag_std, shape),
        )


def compose_intensity(r_t, ambient, phi, noise, quantize=True):
    """Overall generated pixel intensity:
    D((r_T + a) * phi * n_MU * n_MG + n_AU + n_AG), with negative
    pre-quantization values clamped to 0 (sensors report no negative
    counts).  With quantize=False only the non-negativity clamp applies.
    """
    x = (np.asarray(r_t, dtype=np.float64) + ambient) * phi * noise.mu * noise.mg \
        + noise.au + noise.ag
    if quantize:
        return quantize16(x)
    return np.maximum(x, 0.0)
