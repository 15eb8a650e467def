"""Per-record sampling of training observation maps and deterministic
parallel dataset generation.

Every record derives its own random stream from (master seed, record
index, retry ordinal) via numpy's SeedSequence, so the output bytes are
a pure function of the configuration and record count, independent of
worker count and scheduling.  A discarded draw (all rgb cells below the
discard threshold) bumps only its own retry ordinal and never shifts
the streams of other records.
"""

import logging
import multiprocessing
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import effects
from .brdf import (LAMBERTIAN, DisneyMaterial, DisneyParams, MerlMixMaterial)
from .errors import ConfigInvalid
from .formats import DatasetWriter, read_pxom, write_pxom  # noqa: F401 (dataset io re-export)
from .geom import sample_hemisphere_uniform
from .obsmap import build_map_arrays

log = logging.getLogger(__name__)

MAX_RETRIES = 10000


@dataclass
class GenConfig:
    """Every hyperparameter of the generation procedure.

    Defaults follow the dense-light preset; ``sparse()`` switches to the
    10-light, 45-degree configuration.  ``noise_enabled``,
    ``quantize_enabled`` and ``force_lambertian`` are test hooks for
    closed-loop checks and default to production behavior.
    """

    d: int = 32
    lights_min: int = 50
    lights_max: int = 1000
    light_max_elevation_deg: float = 70.0
    brightness_min: float = 0.28
    brightness_max: float = 3.2
    merl_fraction: float = 0.25
    p_shadow: float = 0.75
    p_zero_height: float = 0.25
    shadow_sigma: float = 2.0
    wall_knots: int = 20
    max_reflections: int = 5
    p_ambient: float = 0.75
    ambient_max: float = 0.01
    p_discontinuity: float = 0.15
    t_min: int = 2
    t_max: int = 3
    noise_mu_lo: float = 0.95
    noise_mu_hi: float = 1.05
    noise_mg_std: float = 1e-3
    noise_au_mag: float = 1e-4
    noise_ag_std: float = 1e-4
    discard_threshold: float = 1e-3
    seed: int = 0
    noise_enabled: bool = True
    quantize_enabled: bool = True
    force_lambertian: bool = False

    @classmethod
    def dense(cls, seed=0, **overrides):
        return cls(seed=seed, **overrides)

    @classmethod
    def sparse(cls, seed=0, **overrides):
        return cls(seed=seed, lights_min=10, lights_max=10,
                   light_max_elevation_deg=45.0, **overrides)

    def validate(self):
        if self.d < 2:
            raise ConfigInvalid(f"d must be >= 2, got {self.d}")
        if not 1 <= self.lights_min <= self.lights_max:
            raise ConfigInvalid("light count range invalid")
        if not 0.0 < self.light_max_elevation_deg <= 90.0:
            raise ConfigInvalid("light_max_elevation_deg must be in (0, 90]")
        if not 0.0 < self.brightness_min <= self.brightness_max:
            raise ConfigInvalid("brightness range invalid")
        for name in ("merl_fraction", "p_shadow", "p_zero_height",
                     "p_ambient", "p_discontinuity"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigInvalid(f"{name} must be a probability, got {p}")
        if self.shadow_sigma <= 0.0:
            raise ConfigInvalid("shadow_sigma must be > 0")
        if self.wall_knots < 3:
            raise ConfigInvalid("wall_knots must be >= 3")
        if not 2 <= self.t_min <= self.t_max:
            raise ConfigInvalid("discontinuity sub-pixel range invalid")
        if self.max_reflections < 0:
            raise ConfigInvalid("max_reflections must be >= 0")
        if self.noise_mu_lo > self.noise_mu_hi:
            raise ConfigInvalid("multiplicative-uniform noise range invalid")
        if min(self.noise_mg_std, self.noise_au_mag, self.noise_ag_std) < 0.0:
            raise ConfigInvalid("noise magnitudes must be >= 0")
        if self.discard_threshold <= 0.0:
            raise ConfigInvalid("discard_threshold must be > 0")
        if self.seed < 0:
            raise ConfigInvalid("seed must be >= 0")
        return self

    def to_file(self, path):
        lines = [f"{f.name} = {getattr(self, f.name)}" for f in fields(self)]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_file(cls, path):
        known = {f.name: f.type for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigInvalid(f"{path}:{lineno}: expected key = value")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in known:
                raise ConfigInvalid(f"{path}:{lineno}: unknown key {key!r}")
            typ = known[key]
            try:
                if typ in ("bool", bool):
                    values[key] = val.lower() in ("1", "true", "yes")
                elif typ in ("int", int):
                    values[key] = int(val)
                elif typ in ("float", float):
                    values[key] = float(val)
                else:
                    values[key] = val
            except ValueError as exc:
                raise ConfigInvalid(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
        return cls(**values)


@dataclass(frozen=True)
class RecordFlags:
    merl: bool
    ambient: bool
    discontinuity: bool
    wall_empty: bool
    n_reflections: int
    retries: int


@dataclass(frozen=True)
class TrainingRecord:
    map: "object"            # ObservationMap
    normal: np.ndarray       # (3,) unit ground truth
    flags: RecordFlags


@dataclass
class GenStats:
    generated: int = 0
    discarded: int = 0
    frac_merl: float = 0.0
    frac_ambient: float = 0.0
    frac_discontinuity: float = 0.0
    frac_shadowed: float = 0.0
    frac_empty_wall: float = 0.0
    elapsed_s: float = 0.0
    records_per_s: float = 0.0

    @property
    def attempts(self):
        return self.generated + self.discarded


def _record_rng(cfg, index, retry):
    return np.random.default_rng([cfg.seed, int(index), int(retry)])


def _sample_once(cfg, tables, rng):
    """One draw of the full per-record procedure; None when discarded.

    Draw order is part of the determinism contract: normal, light count,
    light directions, brightnesses, material, albedo, shadow wall,
    reflections, discontinuity, ambient, noises.
    """
    normal = sample_hemisphere_uniform(rng, np.pi / 2)
    if cfg.lights_min == cfg.lights_max:
        j = cfg.lights_min
    else:
        j = int(rng.integers(cfg.lights_min, cfg.lights_max + 1))
    max_elev = np.radians(cfg.light_max_elevation_deg)
    lights = sample_hemisphere_uniform(rng, max_elev, size=j)
    phis = rng.uniform(cfg.brightness_min, cfg.brightness_max, (j, 3))

    is_merl = False
    if tables and cfg.merl_fraction > 0.0 and not cfg.force_lambertian \
            and rng.uniform() < cfg.merl_fraction:
        table = tables[int(rng.integers(0, len(tables)))]
        material = MerlMixMaterial(table=table, weight=float(rng.uniform()))
        is_merl = True
    elif cfg.force_lambertian:
        material = LAMBERTIAN
    else:
        material = DisneyMaterial(DisneyParams(*rng.uniform(0.0, 1.0, 8)))
    albedo = rng.uniform(0.0, 1.0, 3)

    wall = effects.sample_shadow_wall(
        rng, p_empty=1.0 - cfg.p_shadow, p_zero_height=cfg.p_zero_height,
        sigma=cfg.shadow_sigma, knots=cfg.wall_knots)
    refl = effects.sample_reflections(rng, wall, cfg.max_reflections)

    normals = normal[None, :]
    albedos = albedo[None, :]
    discont = rng.uniform() < cfg.p_discontinuity
    if discont:
        t = int(rng.integers(cfg.t_min, cfg.t_max + 1))
        for _ in range(100):
            extra_n = sample_hemisphere_uniform(rng, np.pi / 2, size=t - 1)
            mean = (normal + extra_n.sum(axis=0)) / t
            if np.linalg.norm(mean) > 1e-6:
                break
        else:
            return None
        extra_a = rng.uniform(0.0, 1.0, (t - 1, 3))
        normals = np.vstack([normals, extra_n])
        albedos = np.vstack([albedos, extra_a])
        gt_normal = mean / np.linalg.norm(mean)
    else:
        gt_normal = normal

    ambient_on = rng.uniform() < cfg.p_ambient
    if ambient_on:
        ambient = albedo * normal[2] * rng.uniform(0.0, cfg.ambient_max)
    else:
        ambient = np.zeros(3)

    if cfg.noise_enabled:
        noise = effects.NoiseDraws.sample(
            rng, (j, 3), mu_lo=cfg.noise_mu_lo, mu_hi=cfg.noise_mu_hi,
            mg_std=cfg.noise_mg_std, au_mag=cfg.noise_au_mag,
            ag_std=cfg.noise_ag_std)
    else:
        noise = effects.NoiseDraws.identity()

    r_t = effects.record_reflectance(normals, albedos, lights, wall, refl, material)
    intensities = effects.compose_intensity(r_t, ambient, phis, noise,
                                            quantize=cfg.quantize_enabled)
    omap = build_map_arrays(lights, phis, intensities, cfg.d)
    if omap.rgb.max() < cfg.discard_threshold:
        return None

    flags = RecordFlags(merl=is_merl, ambient=ambient_on,
                        discontinuity=discont, wall_empty=wall.is_empty,
                        n_reflections=len(refl), retries=0)
    return TrainingRecord(map=omap, normal=gt_normal, flags=flags)


def sample_record(cfg, index, tables=None):
    """Single draw for a record ordinal; None when the draw is discarded
    (map below the discard threshold)."""
    cfg.validate()
    return _sample_once(cfg, tables or [], _record_rng(cfg, index, 0))


def _sample_resolved(cfg, tables, index):
    """Retry at increasing retry ordinals until a record survives."""
    for retry in range(MAX_RETRIES):
        rec = _sample_once(cfg, tables, _record_rng(cfg, index, retry))
        if rec is not None:
            if retry:
                rec = TrainingRecord(rec.map, rec.normal,
                                     replace(rec.flags, retries=retry))
            return rec
    raise ConfigInvalid(f"record {index} discarded {MAX_RETRIES} times; "
                        "configuration keeps every map below the discard threshold")


# worker globals, inherited through fork
_POOL_CFG = None
_POOL_TABLES = None


def _worker_chunk(bounds):
    start, stop = bounds
    grids = np.empty((stop - start, _POOL_CFG.d, _POOL_CFG.d, 4), dtype=np.float32)
    normals = np.empty((stop - start, 3), dtype=np.float32)
    flags = []
    for i, index in enumerate(range(start, stop)):
        rec = _sample_resolved(_POOL_CFG, _POOL_TABLES, index)
        grids[i] = rec.map.grid
        normals[i] = rec.normal
        flags.append(rec.flags)
    return grids, normals, flags


def generate(cfg, count, workers=1, sink=None, tables=None):
    """Generate exactly ``count`` records in index order into ``sink``
    (a DatasetWriter or a path).  Returns aggregate GenStats.

    Output bytes are independent of ``workers``.
    """
    global _POOL_CFG, _POOL_TABLES
    cfg.validate()
    if count < 1:
        raise ConfigInvalid(f"count must be >= 1, got {count}")
    if sink is None:
        raise ConfigInvalid("generate() needs a sink (DatasetWriter or path)")
    tables = tables or []
    if cfg.merl_fraction > 0.0 and not tables and not cfg.force_lambertian:
        log.warning("merl_fraction %.2f requested but no tables supplied; "
                    "forcing the measured-material fraction to 0", cfg.merl_fraction)

    own_writer = not isinstance(sink, DatasetWriter)
    writer = DatasetWriter(sink, cfg.d) if own_writer else sink

    chunk = max(1, min(512, count // max(1, workers * 4) or 1))
    bounds = [(s, min(s + chunk, count)) for s in range(0, count, chunk)]

    stats = GenStats()
    counters = {"merl": 0, "ambient": 0, "discontinuity": 0,
                "shadowed": 0, "empty": 0, "retries": 0}

    def _consume(grids, normals, flags):
        for g, n, f in zip(grids, normals, flags):
            writer.append(g, n)
            counters["merl"] += f.merl
            counters["ambient"] += f.ambient
            counters["discontinuity"] += f.discontinuity
            counters["empty"] += f.wall_empty
            counters["shadowed"] += not f.wall_empty
            counters["retries"] += f.retries

    t0 = time.perf_counter()
    try:
        _POOL_CFG, _POOL_TABLES = cfg, tables
        if workers <= 1:
            for start, stop in bounds:
                _consume(*_worker_chunk((start, stop)))
        else:
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(workers) as pool:
                for grids, normals, flags in pool.imap(_worker_chunk, bounds):
                    _consume(grids, normals, flags)
    finally:
        _POOL_CFG = _POOL_TABLES = None
        if own_writer:
            writer.close()
    elapsed = time.perf_counter() - t0

    stats.generated = count
    stats.discarded = counters["retries"]
    stats.frac_merl = counters["merl"] / count
    stats.frac_ambient = counters["ambient"] / count
    stats.frac_discontinuity = counters["discontinuity"] / count
    stats.frac_empty_wall = counters["empty"] / count
    stats.frac_shadowed = counters["shadowed"] / count
    stats.elapsed_s = elapsed
    stats.records_per_s = count / elapsed if elapsed > 0 else float("inf")
    return stats
