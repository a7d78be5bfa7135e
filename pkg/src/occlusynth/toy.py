"""Procedural instance images (flat-shaded shapes on black) for demos and tests."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .ingest import ObjectCatalog, load_catalog

SHAPES = ("ellipse", "rectangle", "triangle", "ring", "cross")


def draw_view(shape: str, color, size: int, rng: np.random.Generator) -> np.ndarray:
    im = Image.new("RGB", (size, size), (0, 0, 0))
    d = ImageDraw.Draw(im)
    m = int(size * rng.uniform(0.08, 0.2))
    box = (m, m, size - 1 - m, size - 1 - int(size * rng.uniform(0.08, 0.3)))
    if shape == "ellipse":
        d.ellipse(box, fill=color)
    elif shape == "rectangle":
        d.rectangle(box, fill=color)
    elif shape == "triangle":
        d.polygon([(box[0], box[3]), (box[2], box[3]), ((box[0] + box[2]) // 2, box[1])], fill=color)
    elif shape == "ring":
        d.ellipse(box, fill=color)
        k = (box[2] - box[0]) // 4
        d.ellipse((box[0] + k, box[1] + k, box[2] - k, box[3] - k), fill=(0, 0, 0))
    elif shape == "cross":
        cx, cy = (box[0] + box[2]) // 2, (box[1] + box[3]) // 2
        t = max(3, (box[2] - box[0]) // 6)
        d.rectangle((box[0], cy - t, box[2], cy + t), fill=color)
        d.rectangle((cx - t, box[1], cx + t, box[3]), fill=color)
    else:
        raise ValueError(f"unknown shape {shape!r}")
    arr = np.asarray(im).astype(np.int16)
    # mild texture so HSV jitter has something to act on
    inside = arr.any(axis=2)
    noise = rng.integers(-12, 13, size=arr.shape)
    arr[inside] = np.clip(arr[inside] + noise[inside], 40, 255)
    return arr.astype(np.uint8)


def write_toy_catalog(root, n_classes: int = 4, n_views: int = 4, size: int = 96, seed: int = 0) -> Path:
    """Write ``root/<class>/<view>.png`` with ``n_classes`` shapes and ``n_views`` views each."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    for c in range(n_classes):
        shape = SHAPES[c % len(SHAPES)]
        color = tuple(int(v) for v in rng.integers(70, 256, size=3))
        cls_dir = root / f"{shape}_{c:02d}"
        cls_dir.mkdir(parents=True, exist_ok=True)
        for v in range(n_views):
            side = int(size * rng.uniform(0.75, 1.0))
            Image.fromarray(draw_view(shape, color, side, rng)).save(cls_dir / f"{v}.png")
    return root


def toy_catalog(root, **kwargs) -> ObjectCatalog:
    write_toy_catalog(root, **kwargs)
    return load_catalog(root)
