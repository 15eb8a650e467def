"""Direct-reflectance evaluators for all supported material families.

Three families: an analytic principled (Disney-style) BRDF, measured
reflectance tables in the MERL binary layout, and pure Lambertian.
Measured tables are blended with a Lambertian lobe through a mixing
weight to form virtual materials.

Conventions shared by every evaluator here:

  * the return value is reflectance already multiplied by max(n.l, 0),
    i.e. the pixel radiance under a unit directional light, per channel;
  * zero whenever n.l <= 0 or n.v <= 0;
  * the albedo multiplies the whole lobe sum per channel, so outputs are
    exactly degree-1 homogeneous in albedo.

All evaluators broadcast: n, l, v may each be (3,) or (..., 3) and are
broadcast together; scalar material parameters may also be arrays
broadcastable to the batch shape.
"""

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, TruncatedFile, UnknownMaterial
from .geom import VIEW, orthonormal_tangents

MERL_SHAPE = (90, 90, 180)
MERL_SCALE = np.array([1.0 / 1500, 1.15 / 1500, 1.66 / 1500])

_INV_PI = 1.0 / np.pi


@dataclass(frozen=True)
class DisneyParams:
    """The eight sampled principled-BRDF parameters, each in [0, 1].

    Subsurface is fixed at zero and the index of refraction at 1.5
    (dielectric F0 = 0.04 at specular = 0.5).
    """

    metallic: float = 0.0
    specular: float = 0.5
    roughness: float = 0.5
    specular_tint: float = 0.0
    sheen: float = 0.0
    sheen_tint: float = 0.5
    clearcoat: float = 0.0
    clearcoat_roughness: float = 0.0

    def as_array(self):
        return np.array([self.metallic, self.specular, self.roughness,
                         self.specular_tint, self.sheen, self.sheen_tint,
                         self.clearcoat, self.clearcoat_roughness])


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _schlick(u):
    m = np.clip(1.0 - u, 0.0, 1.0)
    return m ** 5


def _smith_g1(c, alpha_g):
    a = alpha_g * alpha_g
    b = c * c
    return 1.0 / (c + np.sqrt(a + b - a * b))


def eval_lambertian(n, l, albedo):
    """albedo * max(n.l, 0) per channel (no 1/pi factor)."""
    n = np.asarray(n, dtype=np.float64)
    l = np.asarray(l, dtype=np.float64)
    albedo = np.asarray(albedo, dtype=np.float64)
    nl = np.maximum(_dot(*np.broadcast_arrays(n, l)), 0.0)
    return albedo * nl[..., None]


def eval_disney(n, l, v, albedo, p: DisneyParams):
    """Cosine-weighted principled reflectance.

    Isotropic lobes only (no anisotropy), no subsurface term.  Lobe sum:
    Burley diffuse retro-reflection, GTR2 specular with remapped Smith
    shadowing, hue-tinted sheen, and a GTR1 clearcoat with fixed 0.25
    Smith roughness and F0 = 0.04.  The albedo multiplies the sum;
    tint mixes use the albedo hue (albedo normalized by luminance).
    """
    n, l, v = np.broadcast_arrays(np.asarray(n, dtype=np.float64),
                                  np.asarray(l, dtype=np.float64),
                                  np.asarray(v, dtype=np.float64))
    albedo = np.asarray(albedo, dtype=np.float64)
    metallic = np.asarray(p.metallic, dtype=np.float64)
    specular = np.asarray(p.specular, dtype=np.float64)
    roughness = np.asarray(p.roughness, dtype=np.float64)
    specular_tint = np.asarray(p.specular_tint, dtype=np.float64)[..., None]
    sheen = np.asarray(p.sheen, dtype=np.float64)
    sheen_tint = np.asarray(p.sheen_tint, dtype=np.float64)[..., None]
    clearcoat = np.asarray(p.clearcoat, dtype=np.float64)
    cc_rough = np.asarray(p.clearcoat_roughness, dtype=np.float64)

    nl = _dot(n, l)
    nv = _dot(n, v)
    lit = (nl > 0.0) & (nv > 0.0)
    nl_c = np.maximum(nl, 1e-12)
    nv_c = np.maximum(nv, 1e-12)

    h = l + v
    h = h / np.maximum(np.linalg.norm(h, axis=-1, keepdims=True), 1e-300)
    nh = np.clip(_dot(n, h), -1.0, 1.0)
    lh = _dot(l, h)

    lum = (0.3 * albedo[..., 0] + 0.6 * albedo[..., 1] + 0.1 * albedo[..., 2])[..., None]
    tint = np.where(lum > 0.0, albedo / np.maximum(lum, 1e-300), 1.0)

    fl = _schlick(nl_c)
    fv = _schlick(nv_c)
    fh = _schlick(lh)

    fd90 = 0.5 + 2.0 * lh * lh * roughness
    fd = (1.0 + (fd90 - 1.0) * fl) * (1.0 + (fd90 - 1.0) * fv)
    diffuse = (fd * _INV_PI)[..., None]

    sheen_term = (sheen * fh)[..., None] * ((1.0 - sheen_tint) + sheen_tint * tint)

    alpha = np.maximum(1e-3, roughness * roughness)
    a2 = alpha * alpha
    denom = 1.0 + (a2 - 1.0) * nh * nh
    ds = a2 / (np.pi * denom * denom)
    alpha_g = (0.5 + roughness / 2.0) ** 2
    gs = _smith_g1(nl_c, alpha_g) * _smith_g1(nv_c, alpha_g)
    f0 = ((1.0 - metallic) * 0.08 * specular)[..., None] \
        * ((1.0 - specular_tint) + specular_tint * tint) + metallic[..., None]
    fs = f0 + (1.0 - f0) * fh[..., None]
    spec_term = (gs * ds)[..., None] * fs

    alpha_cc = 0.001 + 0.099 * cc_rough
    a2cc = alpha_cc * alpha_cc
    dr = np.where(alpha_cc >= 1.0, _INV_PI,
                  (a2cc - 1.0) / (np.pi * np.log(a2cc) * (1.0 + (a2cc - 1.0) * nh * nh)))
    fr = 0.04 + 0.96 * fh
    gr = _smith_g1(nl_c, 0.25) * _smith_g1(nv_c, 0.25)
    cc_term = (0.25 * clearcoat * gr * fr * dr)[..., None]

    lobes = (diffuse + sheen_term) * (1.0 - metallic[..., None]) + spec_term + cc_term
    out = albedo * lobes * nl_c[..., None]
    return np.where(lit[..., None], out, 0.0)


class MerlTable:
    """A measured-reflectance table in the MERL half-angle layout.

    Raw values are kept as stored; the per-channel radiometric scale
    factors are applied at lookup time.  Negative raw entries mark
    invalid bins and evaluate to zero.
    """

    def __init__(self, name, data):
        if data.shape != (3,) + MERL_SHAPE:
            raise DimensionMismatch(f"table data shape {data.shape}")
        self.name = name
        self.data = data

    def __repr__(self):
        return f"MerlTable({self.name!r})"


def load_merl(source, name=None):
    """Read a MERL-layout ``.binary`` measured-BRDF file.

    Layout: three 32-bit LE ints (90, 90, 180) followed by
    3*90*90*180 64-bit LE doubles, channel-major (R block, G block,
    B block).  ``source`` may be a path or a binary stream.
    """
    if hasattr(source, "read"):
        stream = source
        close = False
    else:
        if name is None:
            name = Path(source).stem
        stream = open(source, "rb")
        close = True
    try:
        header = stream.read(12)
        if len(header) < 12:
            raise TruncatedFile("missing dimension header")
        dims = struct.unpack("<3i", header)
        if dims != MERL_SHAPE:
            raise DimensionMismatch(f"expected dimensions {MERL_SHAPE}, got {dims}")
        count = 3 * MERL_SHAPE[0] * MERL_SHAPE[1] * MERL_SHAPE[2]
        payload = stream.read(count * 8)
        if len(payload) < count * 8:
            raise TruncatedFile(
                f"expected {count} doubles, got {len(payload) // 8}")
        data = np.frombuffer(payload, dtype="<f8", count=count).reshape((3,) + MERL_SHAPE)
    finally:
        if close:
            stream.close()
    return MerlTable(name or "merl", data.astype(np.float64))


def _half_diff_indices(n, l, v):
    """Map global-frame (n, l, v) to MERL bin indices.

    Rusinkiewicz coordinates in the local frame of n: theta_h gets the
    square-root warp of the original database release; phi_d is folded
    into [0, pi) (isotropic reciprocity).  Nearest-bin indexing, no
    interpolation.
    """
    t, b = orthonormal_tangents(n)
    ll = np.stack([_dot(l, t), _dot(l, b), _dot(l, n)], axis=-1)
    vv = np.stack([_dot(v, t), _dot(v, b), _dot(v, n)], axis=-1)
    h = ll + vv
    with np.errstate(invalid="ignore", divide="ignore"):
        h = h / np.maximum(np.linalg.norm(h, axis=-1, keepdims=True), 1e-300)
    theta_h = np.arccos(np.clip(h[..., 2], -1.0, 1.0))
    phi_h = np.arctan2(h[..., 1], h[..., 0])

    # rotate l by -phi_h about z, then by -theta_h about y
    cph, sph = np.cos(phi_h), np.sin(phi_h)
    x1 = ll[..., 0] * cph + ll[..., 1] * sph
    y1 = -ll[..., 0] * sph + ll[..., 1] * cph
    z1 = ll[..., 2]
    cth, sth = np.cos(theta_h), np.sin(theta_h)
    x2 = x1 * cth - z1 * sth
    z2 = x1 * sth + z1 * cth
    theta_d = np.arccos(np.clip(z2, -1.0, 1.0))
    phi_d = np.mod(np.arctan2(y1, x2), np.pi)

    ih = np.sqrt(np.clip(theta_h / (np.pi / 2), 0.0, None)) * MERL_SHAPE[0]
    ih = np.clip(ih.astype(np.int64), 0, MERL_SHAPE[0] - 1)
    idx_d = np.clip((theta_d / (np.pi / 2) * MERL_SHAPE[1]).astype(np.int64),
                    0, MERL_SHAPE[1] - 1)
    ip = np.clip((phi_d / np.pi * MERL_SHAPE[2]).astype(np.int64),
                 0, MERL_SHAPE[2] - 1)
    return ih, idx_d, ip


def eval_merl(table, n, l, v):
    """Measured-table lookup times max(n.l, 0), per channel."""
    n, l, v = np.broadcast_arrays(np.asarray(n, dtype=np.float64),
                                  np.asarray(l, dtype=np.float64),
                                  np.asarray(v, dtype=np.float64))
    nl = _dot(n, l)
    nv = _dot(n, v)
    lit = (nl > 0.0) & (nv > 0.0)
    ih, idx_d, ip = _half_diff_indices(n, l, v)
    raw = table.data[:, ih, idx_d, ip]           # (3, ...) channel-first
    raw = np.moveaxis(raw, 0, -1) * MERL_SCALE
    raw = np.maximum(raw, 0.0)                   # invalid (negative) bins -> 0
    out = raw * np.maximum(nl, 0.0)[..., None]
    return np.where(lit[..., None], out, 0.0)


@dataclass(frozen=True)
class LambertianMaterial:
    pass


@dataclass(frozen=True)
class DisneyMaterial:
    params: DisneyParams


@dataclass(frozen=True)
class MerlMixMaterial:
    """Virtual material: measured table mixed with a Lambertian lobe.

    reflectance = albedo * (w * table_lookup + (1 - w) * max(n.l, 0))
    """

    table: MerlTable
    weight: float


MaterialSpec = LambertianMaterial | DisneyMaterial | MerlMixMaterial

LAMBERTIAN = LambertianMaterial()


def eval_material(n, l, v, albedo, material):
    """Dispatch the direct-reflectance evaluation for a material spec."""
    if isinstance(material, DisneyMaterial):
        return eval_disney(n, l, v, albedo, material.params)
    if isinstance(material, MerlMixMaterial):
        albedo = np.asarray(albedo, dtype=np.float64)
        w = material.weight
        merl = eval_merl(material.table, n, l, v)
        nl = np.maximum(_dot(*np.broadcast_arrays(np.asarray(n, dtype=np.float64),
                                                  np.asarray(l, dtype=np.float64))), 0.0)
        return albedo * (w * merl + (1.0 - w) * nl[..., None])
    if isinstance(material, LambertianMaterial):
        return eval_lambertian(n, l, albedo)
    raise UnknownMaterial(f"unsupported material spec {material!r}")


class MerlLibrary:
    """Directory of MERL-layout ``.binary`` tables, loaded lazily by name."""

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory else None
        self._tables = {}
        self._names = []
        if self.directory is not None and self.directory.is_dir():
            self._names = sorted(p.stem for p in self.directory.glob("*.binary"))

    @property
    def names(self):
        return list(self._names)

    def __len__(self):
        return len(self._names)

    def resolve(self, table_id):
        if table_id not in self._names:
            raise UnknownMaterial(f"no MERL table named {table_id!r}")
        if table_id not in self._tables:
            self._tables[table_id] = load_merl(self.directory / f"{table_id}.binary")
        return self._tables[table_id]

    def load_all(self):
        return [self.resolve(name) for name in self._names]


def merl_library_from_env(explicit_dir=None, env_var="PIXELPS_MERL_DIR"):
    directory = explicit_dir or os.environ.get(env_var)
    return MerlLibrary(directory)
