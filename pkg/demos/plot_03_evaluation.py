"""
Scoring occlusion segmentation
==============================

Predictions are matched to ground truth on visible masks. Each match is
then scored by visible IoU (SQ) and by the mean IoU over background,
visible and occluded masks (SQ_multi). Here the "predictions" are the
ground truth shifted by a few pixels.
"""
import tempfile

import numpy as np

from occlusynth import SceneAnnotation, SceneConfig, evaluate, place_instance, scene_seed, synthesize_scene
from occlusynth.ingest import load_catalog
from occlusynth.toy import write_toy_catalog

catalog = load_catalog(write_toy_catalog(tempfile.mkdtemp(), n_classes=4, n_views=3))
cfg = SceneConfig(width=256, height=192, n_instances=(2, 6))
gt = {i: synthesize_scene(catalog, cfg, scene_seed(1, i), scene_id=i)[1] for i in range(20)}


def shifted(scene, dy, dx):
    out = SceneAnnotation(scene.scene_id, scene.width, scene.height)
    for inst in scene.instances:
        out = place_instance(out, np.roll(inst.full, (dy, dx), axis=(0, 1)), inst.object_class,
                             inst.class_id, inst.instance_id)
    return out


print("self-evaluation mPQ:", evaluate(gt, gt).mPQ)
for d in (1, 3, 6):
    report = evaluate({k: shifted(s, d, d) for k, s in gt.items()}, gt)
    print(f"\nshift {d} px")
    print(report.table())
