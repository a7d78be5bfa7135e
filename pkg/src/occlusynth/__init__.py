"""
Synthetic stacked-object scenes with visible/occluded ground truth,
multi-mask panoptic-quality scoring and occlusion-aware pick ordering.
"""
from .augment import AugmentParams, AugmentRanges, DEFAULT_RANGES, sample_params
from .compositor import (
    DensityMap,
    InstanceAnnotation,
    SceneAnnotation,
    SceneConfig,
    place_instance,
    rasterize_density,
    scene_seed,
    scene_violations,
    synthesize_scene,
)
from .ingest import InstanceImage, ObjectCatalog, extract_foreground, load_catalog
from .mask_core import RleMask, iou, rle_decode, rle_encode
from .metrics import MetricReport, evaluate, instance_miou, match_instances
from .occlusion_planner import OcclusionGraph, PickPlan, build_graph, interpret_stacking, occlusion_ratio, plan_pick

__version__ = "0.1.0"

__all__ = [
    "AugmentParams",
    "AugmentRanges",
    "DEFAULT_RANGES",
    "sample_params",
    "DensityMap",
    "InstanceAnnotation",
    "SceneAnnotation",
    "SceneConfig",
    "place_instance",
    "rasterize_density",
    "scene_seed",
    "scene_violations",
    "synthesize_scene",
    "InstanceImage",
    "ObjectCatalog",
    "extract_foreground",
    "load_catalog",
    "RleMask",
    "iou",
    "rle_decode",
    "rle_encode",
    "MetricReport",
    "evaluate",
    "instance_miou",
    "match_instances",
    "OcclusionGraph",
    "PickPlan",
    "build_graph",
    "interpret_stacking",
    "occlusion_ratio",
    "plan_pick",
]
