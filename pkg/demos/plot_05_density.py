"""
Stacking density
================

Counting, per pixel, how many instances are visible, occluded, or absent
gives a compact picture of how deep a pile is.
"""
import tempfile

import numpy as np

from occlusynth import SceneConfig, load_catalog, rasterize_density, scene_seed, synthesize_scene
from occlusynth.toy import write_toy_catalog

catalog = load_catalog(write_toy_catalog(tempfile.mkdtemp(), n_classes=4, n_views=3))
cfg = SceneConfig(width=200, height=150, n_instances=(8, 8))
_, scene = synthesize_scene(catalog, cfg, scene_seed(5, 0))
d = rasterize_density(scene.instances, scene.shape)

print("max depth:", int(d.occluded.max()) + 1)
print("pixels covered by k instances:")
depth = (d.visible + d.occluded).astype(int)
for k, n in enumerate(np.bincount(depth.ravel())):
    print(f"  {k}: {n}")
# the visible plane is an indicator: at most one instance shows at a pixel
assert d.visible.max() <= 1
