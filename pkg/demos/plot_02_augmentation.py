"""
Instance augmentation
=====================

Each pasted view is jittered in saturation and value, warped by a random
affine map and blended into the canvas through a Gaussian-softened matte.
"""
import sys
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from occlusynth import DEFAULT_RANGES, load_catalog
from occlusynth.augment import augment_instance, blend_paste, make_rng, sample_params
from occlusynth.toy import write_toy_catalog

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
catalog = load_catalog(write_toy_catalog(out / "catalog", n_classes=2, n_views=1))
view = catalog.entries[catalog.class_names[0]][0]

print(DEFAULT_RANGES)
rng = make_rng(3)
tiles = []
for k in range(6):
    params = sample_params(rng)
    warped = augment_instance(view, params)
    canvas = np.full((160, 160, 3), 40, np.uint8)
    h, w = warped.shape
    pos = ((160 - w) // 2, (160 - h) // 2)
    tiles.append(blend_paste(canvas, warped, pos, params.blend_sigma))
    print(f"{k}: scale {params.affine_scale:.2f}  rotate {params.rotate:7.1f}  "
          f"shear {params.shear:6.1f}  S x{params.hsv_s_scale:.2f}  V x{params.hsv_v_scale:.2f}  "
          f"sigma {params.blend_sigma:.2f}")

# lay the six samples out in a 2 x 3 sheet
sheet = np.concatenate([np.concatenate(tiles[:3], axis=1), np.concatenate(tiles[3:], axis=1)], axis=0)
Image.fromarray(sheet).save(out / "augmentations.png")
print("->", out / "augmentations.png")
