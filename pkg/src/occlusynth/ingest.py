"""
Instance-image catalog: a few views per object shot on a black background,
with foreground masks obtained by luminance thresholding and morphological cleanup.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .mask_core import remove_small_components

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 25
DEFAULT_MIN_AREA = 64
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")

_CLOSE_STRUCTURE = np.ones((3, 3), dtype=bool)


class CatalogError(Exception):
    pass


@dataclass(frozen=True, eq=False)
class InstanceImage:
    object_class: str
    view_id: int
    pixels: np.ndarray  # (H, W, 3) uint8
    foreground: np.ndarray  # (H, W) bool

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"pixels must be (H, W, 3), got {self.pixels.shape}")
        if self.foreground.shape != self.pixels.shape[:2]:
            raise ValueError(
                f"foreground {self.foreground.shape} does not match pixels {self.pixels.shape[:2]}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.foreground.shape


@dataclass(frozen=True)
class ObjectCatalog:
    entries: dict[str, list[InstanceImage]]
    class_ids: dict[str, int] = field(default=None)

    def __post_init__(self):
        if self.class_ids is None:
            ids = {name: i for i, name in enumerate(sorted(self.entries))}
            object.__setattr__(self, "class_ids", ids)
        if sorted(self.class_ids.values()) != list(range(len(self.entries))):
            raise CatalogError("class ids must be a bijection onto 0..n_classes-1")
        for name, views in self.entries.items():
            if not views:
                raise CatalogError(f"class {name!r} has no views")

    @property
    def class_names(self) -> list[str]:
        """Class names ordered by class id."""
        return sorted(self.class_ids, key=self.class_ids.__getitem__)

    def __len__(self):
        return len(self.entries)

    @property
    def n_views(self) -> int:
        return sum(len(v) for v in self.entries.values())


def luminance(pixels: np.ndarray) -> np.ndarray:
    """Rounded Rec. 601 luma of an RGB raster, as uint8."""
    rgb = pixels[..., :3].astype(np.float64)
    y = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.rint(y), 0, 255).astype(np.uint8)


def binary_close(mask: np.ndarray, iterations: int = 1) -> np.ndarray:
    # pad so erosion does not eat pixels touching the border
    p = iterations
    padded = np.pad(mask, p)
    closed = ndimage.binary_closing(padded, structure=_CLOSE_STRUCTURE, iterations=iterations)
    return closed[p:-p, p:-p]


def extract_foreground(pixels, threshold: int = DEFAULT_THRESHOLD, min_area: int = DEFAULT_MIN_AREA):
    """
    Foreground of an instance image on a dark background.

    Pixels with luminance strictly above ``threshold`` are kept, closed with a
    3x3 element, and components smaller than ``min_area`` are discarded.
    """
    pixels = np.asarray(pixels)
    if pixels.size == 0 or pixels.ndim != 3:
        raise ValueError("expected a non-empty (H, W, 3) raster")
    if not 0 <= threshold <= 255:
        raise ValueError(f"threshold must be within [0, 255], got {threshold}")
    mask = luminance(pixels) > threshold
    mask = binary_close(mask)
    return remove_small_components(mask, min_area, connectivity=8)


def read_instance_image(path, object_class: str, view_id: int,
                        threshold: int = DEFAULT_THRESHOLD,
                        min_area: int = DEFAULT_MIN_AREA) -> InstanceImage:
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            has_alpha = im.mode in ("RGBA", "LA") or (im.mode == "P" and "transparency" in im.info)
            arr = np.asarray(im.convert("RGBA" if has_alpha else "RGB"))
    except (OSError, UnidentifiedImageError) as e:
        raise CatalogError(f"cannot read image {path}: {e}") from e
    pixels = np.ascontiguousarray(arr[..., :3])
    if pixels.size == 0:
        raise CatalogError(f"empty image {path}")
    if has_alpha:
        fg = arr[..., 3] > 127
    else:
        fg = extract_foreground(pixels, threshold, min_area)
    return InstanceImage(object_class, view_id, pixels, fg)


def _view_id(path: Path, index: int) -> int:
    try:
        return int(path.stem)
    except ValueError:
        return index


def load_catalog(root, threshold: int = DEFAULT_THRESHOLD, min_area: int = DEFAULT_MIN_AREA,
                 jobs: int | None = None) -> ObjectCatalog:
    """Load ``root/<class_name>/<view_id>.png`` into an :class:`ObjectCatalog`."""
    root = Path(root)
    if not root.is_dir():
        raise CatalogError(f"catalog root {root} is not a directory")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise CatalogError(f"catalog root {root} contains no class directories")

    jobs_list = []
    for d in class_dirs:
        files = sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        if not files:
            raise CatalogError(f"class {d.name!r} has no image files in {d}")
        for i, f in enumerate(files):
            jobs_list.append((f, d.name, _view_id(f, i)))

    def load(item):
        f, name, vid = item
        return read_instance_image(f, name, vid, threshold, min_area)

    workers = jobs or min(8, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        images = list(pool.map(load, jobs_list))

    entries: dict[str, list[InstanceImage]] = {d.name: [] for d in class_dirs}
    for img in images:
        if not img.foreground.any():
            logger.warning("view %s/%s has an empty foreground", img.object_class, img.view_id)
        entries[img.object_class].append(img)
    for name, views in entries.items():
        views.sort(key=lambda v: v.view_id)
    logger.info("loaded %d classes, %d views from %s", len(entries), len(images), root)
    return ObjectCatalog(entries)
