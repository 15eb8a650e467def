"""Per-pixel observation-map data generation and photometric stereo toolkit."""

from . import brdf, cli, datagen, effects, formats, geom, obsmap, pstereo
from .brdf import (LAMBERTIAN, DisneyMaterial, DisneyParams, MerlLibrary,
                   MerlMixMaterial, MerlTable, eval_disney, eval_lambertian,
                   eval_material, eval_merl, load_merl)
from .datagen import GenConfig, GenStats, TrainingRecord, generate, sample_record
from .effects import (NoiseDraws, ReflectionSet, ShadowWall, compose_intensity,
                      is_shaded, quantize16, sample_reflections,
                      sample_shadow_wall, self_reflection, total_reflectance)
from .formats import (DatasetWriter, read_pxnm, read_pxom, write_pxnm,
                      write_pxom)
from .geom import angular_error, rotate_about_z, sample_hemisphere_uniform
from .obsmap import LightSample, ObservationMap, build_map, cell_of, rotated_variant
from .pstereo import (EvalResult, ImageStack, NormalMap, RenderEffects,
                      SubprocessPredictor, evaluate, extract_map, extract_maps,
                      k_rotation_predict, load_image_stack, load_lights,
                      render_sphere, woodham_solve)

__version__ = "0.1.0"
