"""
Synthesizing a stacked scene
============================

Objects cut from single-object photos are pasted one on top of another.
Since the pasting order is known, every instance gets an exact visible
mask and an exact occluded mask.
"""
import sys
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from occlusynth import SceneConfig, load_catalog, scene_seed, scene_violations, synthesize_scene
from occlusynth.cli import overlay
from occlusynth.toy import write_toy_catalog

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())

# A small procedural catalog stands in for real object photos:
# one directory per class, a few views each, objects on black.
catalog = load_catalog(write_toy_catalog(out / "catalog", n_classes=4, n_views=3))
print("classes:", catalog.class_names)

cfg = SceneConfig(width=200, height=150, n_instances=(5, 5))
image, scene = synthesize_scene(catalog, cfg, scene_seed(2, 0))

# Instances are listed bottom to top. The last one is never occluded.
for inst in scene.instances:
    vis, occ = inst.visible.sum(), inst.occluded.sum()
    print(f"{inst.instance_id}  {inst.object_class:<14} visible {vis:6d}  occluded {occ:6d}")
print("violations:", scene_violations(scene))

Image.fromarray(image).save(out / "composite.png")
Image.fromarray(overlay(scene.shape, [(i.instance_id, i.visible) for i in scene.instances])).save(out / "visible.png")
Image.fromarray(overlay(scene.shape, [(i.instance_id, i.occluded) for i in scene.instances])).save(out / "occluded.png")

# Full region = visible + occluded. Together they cover what the union of pastes covers.
union = np.zeros(scene.shape, bool)
for inst in scene.instances:
    union |= inst.full
print("covered pixels:", int(union.sum()), "->", out)
