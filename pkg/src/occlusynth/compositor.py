"""
Stacked-scene synthesis with exact visible/occluded ground truth.

Instances are placed bottom to top. Because the filled region of everything
already on the canvas is known, each new full mask splits the earlier
instances' visible pixels into still-visible and now-occluded.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image

from .augment import DEFAULT_RANGES, AugmentRanges, augment_instance, blend_into, make_rng, sample_params
from .ingest import IMAGE_SUFFIXES, InstanceImage, ObjectCatalog
from .mask_core import BoundingBox, MaskShapeError, as_mask, tight_bbox

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class InstanceAnnotation:
    instance_id: int
    object_class: str
    visible: np.ndarray
    occluded: np.ndarray
    class_id: int = -1
    score: float | None = None

    @property
    def full(self) -> np.ndarray:
        return self.visible | self.occluded

    @property
    def bbox(self) -> BoundingBox:
        return tight_bbox(self.full)

    @property
    def shape(self) -> tuple[int, int]:
        return self.visible.shape


@dataclass(eq=False)
class SceneAnnotation:
    scene_id: int
    width: int
    height: int
    instances: list[InstanceAnnotation] = field(default_factory=list)
    seed: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def by_id(self, instance_id: int) -> InstanceAnnotation:
        for inst in self.instances:
            if inst.instance_id == instance_id:
                return inst
        raise KeyError(f"no instance {instance_id} in scene {self.scene_id}")


def place_instance(scene: SceneAnnotation, full_mask, object_class: str, class_id: int = -1,
                   instance_id: int | None = None) -> SceneAnnotation:
    """
    Put a new instance on top of the stack. Earlier instances lose the newly
    covered pixels from their visible mask and gain them as occluded.
    Returns a new scene; ``scene`` is left untouched.
    """
    full_mask = as_mask(full_mask)
    if full_mask.shape != scene.shape:
        raise MaskShapeError(f"mask {full_mask.shape} does not match scene {scene.shape}")
    updated = [
        replace(j, visible=j.visible & ~full_mask, occluded=j.occluded | (j.visible & full_mask))
        for j in scene.instances
    ]
    if instance_id is None:
        instance_id = max((j.instance_id for j in scene.instances), default=-1) + 1
    updated.append(InstanceAnnotation(
        instance_id, object_class, full_mask.copy(), np.zeros_like(full_mask), class_id,
    ))
    return replace(scene, instances=updated)


def stack_scene(scene_id: int, shape: tuple[int, int], placements, seed: int = 0) -> SceneAnnotation:
    """Build a scene from ``(full_mask, object_class, class_id)`` triples in bottom-to-top order."""
    h, w = shape
    scene = SceneAnnotation(scene_id, w, h, [], seed)
    for i, (mask, name, cid) in enumerate(placements):
        scene = place_instance(scene, mask, name, cid, instance_id=i)
    return scene


def scene_violations(scene: SceneAnnotation) -> list[str]:
    """Human-readable list of broken scene invariants (empty when valid)."""
    problems = []
    covered_later = np.zeros(scene.shape, dtype=bool)
    seen_visible = np.zeros(scene.shape, dtype=bool)
    for inst in reversed(scene.instances):
        tag = f"scene {scene.scene_id} instance {inst.instance_id}"
        if inst.visible.shape != scene.shape or inst.occluded.shape != scene.shape:
            problems.append(f"{tag}: mask shape differs from scene {scene.shape}")
            continue
        if (inst.visible & inst.occluded).any():
            problems.append(f"{tag}: visible and occluded masks overlap")
        if (inst.visible & seen_visible).any():
            problems.append(f"{tag}: visible mask overlaps another instance's visible mask")
        if (inst.occluded & ~covered_later).any():
            problems.append(f"{tag}: occluded pixels not visible on any later instance")
        seen_visible |= inst.visible
        covered_later |= inst.visible
    ids = [i.instance_id for i in scene.instances]
    if len(set(ids)) != len(ids):
        problems.append(f"scene {scene.scene_id}: duplicate instance ids")
    return problems


@dataclass(frozen=True)
class DensityMap:
    """Per-pixel instance counts, channels ordered (background, visible, occluded)."""

    channels: np.ndarray  # (3, H, W) float64

    @property
    def background(self):
        return self.channels[0]

    @property
    def visible(self):
        return self.channels[1]

    @property
    def occluded(self):
        return self.channels[2]


def rasterize_density(instances, shape: tuple[int, int]) -> DensityMap:
    """
    Count, for each pixel, the instances whose visible / occluded mask covers
    it; the background plane counts the instances whose full region misses it.
    """
    h, w = shape
    vis = np.zeros((h, w), dtype=np.float64)
    occ = np.zeros((h, w), dtype=np.float64)
    for inst in instances:
        if inst.visible.shape != (h, w) or inst.occluded.shape != (h, w):
            raise MaskShapeError(f"instance {inst.instance_id} does not match {shape}")
        vis += inst.visible
        occ += inst.occluded
    bg = len(instances) - vis - occ
    return DensityMap(np.stack([bg, vis, occ]))


# -- synthesis --------------------------------------------------------------

@dataclass(frozen=True)
class SceneConfig:
    width: int = 640
    height: int = 480
    n_instances: tuple[int, int] = (1, 8)
    background: tuple[int, int, int] | str = (0, 0, 0)
    augment: AugmentRanges = DEFAULT_RANGES
    min_visible_px: int = 16
    allow_duplicates: bool = True
    master_seed: int = 0
    min_in_canvas: float = 0.5

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("width and height must be positive")
        lo, hi = self.n_instances
        if lo < 0 or lo > hi:
            raise ValueError(f"n_instances range ({lo}, {hi}) is empty")
        object.__setattr__(self, "n_instances", (int(lo), int(hi)))
        if self.min_visible_px < 0:
            raise ValueError("min_visible_px must be non-negative")
        if not 0.0 < self.min_in_canvas <= 1.0:
            raise ValueError("min_in_canvas must be in (0, 1]")
        if not isinstance(self.background, str):
            color = tuple(int(c) for c in self.background)
            if len(color) != 3 or not all(0 <= c <= 255 for c in color):
                raise ValueError("background colour must be three values in [0, 255]")
            object.__setattr__(self, "background", color)

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width


def scene_seed(master_seed: int, index: int) -> int:
    """64-bit per-scene seed; independent of how scenes are split across workers."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFF_FFFF_FFFF_FFFF, int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


@lru_cache(maxsize=8)
def _backdrop_files(directory: str) -> tuple[str, ...]:
    files = sorted(str(p) for p in Path(directory).iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise FileNotFoundError(f"no background images in {directory}")
    return tuple(files)


@lru_cache(maxsize=32)
def _backdrop(path: str, shape: tuple[int, int]) -> np.ndarray:
    with Image.open(path) as im:
        im = im.convert("RGB").resize((shape[1], shape[0]), Image.BILINEAR)
        return np.asarray(im)


def make_background(cfg: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    if isinstance(cfg.background, str):
        files = _backdrop_files(cfg.background)
        return _backdrop(files[int(rng.integers(len(files)))], cfg.shape).copy()
    return np.tile(np.array(cfg.background, dtype=np.uint8), cfg.shape + (1,))


def _cropped(view: InstanceImage) -> InstanceImage:
    box = tight_bbox(view.foreground)
    if box.is_empty:
        return view
    sl = box.slices()
    return InstanceImage(view.object_class, view.view_id, view.pixels[sl], view.foreground[sl])


def _place_offset(mask: np.ndarray, cfg: SceneConfig, rng: np.random.Generator) -> tuple[int, int]:
    """Uniform top-left (x, y) keeping at least ``min_in_canvas`` of the mask on the canvas."""
    h, w = mask.shape
    H, W = cfg.shape
    total = int(mask.sum())
    need = cfg.min_in_canvas * total
    for _ in range(100):
        x = int(rng.integers(-w + 1, W))
        y = int(rng.integers(-h + 1, H))
        inside = mask[max(0, -y):min(h, H - y), max(0, -x):min(w, W - x)].sum()
        if inside >= need:
            return x, y
    return (W - w) // 2, (H - h) // 2


def _canvas_mask(mask: np.ndarray, offset: tuple[int, int], shape: tuple[int, int]) -> np.ndarray:
    h, w = mask.shape
    H, W = shape
    x, y = offset
    out = np.zeros(shape, dtype=bool)
    y0, y1, x0, x1 = max(y, 0), min(y + h, H), max(x, 0), min(x + w, W)
    if y0 < y1 and x0 < x1:
        out[y0:y1, x0:x1] = mask[y0 - y:y1 - y, x0 - x:x1 - x]
    return out


@dataclass
class _Placement:
    warped: InstanceImage
    offset: tuple[int, int]
    sigma: float
    full: np.ndarray
    class_id: int


def _draw_placements(catalog: ObjectCatalog, cfg: SceneConfig, rng: np.random.Generator) -> list[_Placement]:
    names = catalog.class_names
    lo, hi = cfg.n_instances
    n = int(rng.integers(lo, hi + 1))
    if cfg.allow_duplicates:
        picks = [names[int(rng.integers(len(names)))] for _ in range(n)]
    else:
        n = min(n, len(names))
        picks = [names[int(k)] for k in rng.permutation(len(names))[:n]]
    placements = []
    for name in picks:
        views = catalog.entries[name]
        view = views[int(rng.integers(len(views)))]
        params = sample_params(rng, cfg.augment)
        warped = _cropped(augment_instance(_cropped(view), params))
        if not warped.foreground.any():
            continue
        offset = _place_offset(warped.foreground, cfg, rng)
        full = _canvas_mask(warped.foreground, offset, cfg.shape)
        if not full.any():
            continue
        placements.append(_Placement(warped, offset, params.blend_sigma, full, catalog.class_ids[name]))
    return placements


def _drop_buried(placements: list[_Placement], cfg: SceneConfig) -> list[_Placement]:
    # removing an instance only uncovers instances below it, so the topmost
    # under-visible instance must go regardless of what happens underneath
    kept = list(placements)
    while True:
        covered = np.zeros(cfg.shape, dtype=bool)
        victim = None
        for k in range(len(kept) - 1, -1, -1):
            if np.count_nonzero(kept[k].full & ~covered) < cfg.min_visible_px:
                victim = k
                break
            covered |= kept[k].full
        if victim is None:
            return kept
        del kept[victim]


def synthesize_scene(catalog: ObjectCatalog, cfg: SceneConfig, seed: int,
                     scene_id: int = 0) -> tuple[np.ndarray, SceneAnnotation]:
    """
    Compose one cluttered scene. Returns the RGB image and its annotation.
    Output is a pure function of (catalog, cfg, seed).
    """
    if catalog is None or len(catalog) == 0:
        raise ValueError("catalog is empty")
    rng = make_rng(seed)
    canvas = make_background(cfg, rng)
    placements = _drop_buried(_draw_placements(catalog, cfg, rng), cfg)
    names = catalog.class_names
    scene = SceneAnnotation(scene_id, cfg.width, cfg.height, [], int(seed))
    for i, p in enumerate(placements):
        blend_into(canvas, p.warped, p.offset, p.sigma)
        scene = place_instance(scene, p.full, names[p.class_id], p.class_id, instance_id=i)
    return canvas, scene
