"""
On-disk dataset layout::

    out/
      images/<scene_id:06d>.png
      annotations/<scene_id:06d>.json
      class_names.json
      manifest.json

Annotations are SceneAnnotation JSON with row-major RLE masks. Prediction
directories use the same schema plus an optional per-instance ``score``.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .compositor import InstanceAnnotation, SceneAnnotation
from .mask_core import RleError, RleMask, rle_decode, rle_encode


class SchemaError(ValueError):
    pass


def scene_to_dict(scene: SceneAnnotation) -> dict:
    instances = []
    for inst in scene.instances:
        d = {
            "instance_id": int(inst.instance_id),
            "class": inst.object_class,
            "class_id": int(inst.class_id),
            "bbox": list(inst.bbox),
            "visible_rle": rle_encode(inst.visible).to_dict(),
            "occluded_rle": rle_encode(inst.occluded).to_dict(),
        }
        if inst.score is not None:
            d["score"] = float(inst.score)
        instances.append(d)
    return {
        "scene_id": int(scene.scene_id),
        "width": int(scene.width),
        "height": int(scene.height),
        "seed": int(scene.seed),
        "instances": instances,
    }


def _decode(d: dict, key: str, shape: tuple[int, int]) -> np.ndarray:
    try:
        rle = RleMask.from_dict(d[key])
    except KeyError:
        raise SchemaError(f"missing {key}") from None
    except RleError as e:
        raise SchemaError(f"{key}: {e}") from None
    if rle.size != shape:
        raise SchemaError(f"{key}: size {list(rle.size)} differs from scene {list(shape)}")
    return rle_decode(rle)


def scene_from_dict(d: dict) -> SceneAnnotation:
    try:
        scene_id, width, height = int(d["scene_id"]), int(d["width"]), int(d["height"])
        raw_instances = d["instances"]
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"malformed scene header: {e!r}") from None
    shape = (height, width)
    instances = []
    for k, item in enumerate(raw_instances):
        try:
            iid = int(item["instance_id"])
            name = str(item["class"])
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"instance #{k}: {e!r}") from None
        try:
            vis = _decode(item, "visible_rle", shape)
            occ = _decode(item, "occluded_rle", shape)
        except SchemaError as e:
            raise SchemaError(f"instance {iid}: {e}") from None
        score = item.get("score")
        instances.append(InstanceAnnotation(
            iid, name, vis, occ, int(item.get("class_id", -1)),
            None if score is None else float(score),
        ))
    return SceneAnnotation(scene_id, width, height, instances, int(d.get("seed", 0)))


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_annotation(path, scene: SceneAnnotation) -> None:
    Path(path).write_text(dumps(scene_to_dict(scene)))


def read_annotation(path) -> SceneAnnotation:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: invalid JSON ({e})") from None
    try:
        return scene_from_dict(data)
    except SchemaError as e:
        raise SchemaError(f"{path}: {e}") from None


def scene_stem(scene_id: int) -> str:
    return f"{int(scene_id):06d}"


def write_image(path, image: np.ndarray) -> None:
    # fixed encoder settings keep files byte-identical across runs
    Image.fromarray(image, "RGB").save(path, format="PNG", compress_level=1)


def write_mask(path, mask: np.ndarray) -> None:
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), "L").save(path, format="PNG", compress_level=1)


def image_size(path) -> tuple[int, int]:
    """(height, width) from the file header."""
    with Image.open(path) as im:
        return im.height, im.width


def write_scene(out_dir, image: np.ndarray, scene: SceneAnnotation) -> None:
    out_dir = Path(out_dir)
    stem = scene_stem(scene.scene_id)
    write_image(out_dir / "images" / f"{stem}.png", image)
    write_annotation(out_dir / "annotations" / f"{stem}.json", scene)


def prepare_dataset_dir(out_dir, class_names) -> Path:
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "annotations").mkdir(parents=True, exist_ok=True)
    (out_dir / "class_names.json").write_text(json.dumps(list(class_names)))
    return out_dir


def write_manifest(out_dir, manifest: dict) -> None:
    (Path(out_dir) / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def read_manifest(dataset_dir) -> dict:
    return json.loads((Path(dataset_dir) / "manifest.json").read_text())


def annotation_paths(dataset_dir) -> dict[int, Path]:
    ann_dir = Path(dataset_dir) / "annotations"
    if not ann_dir.is_dir():
        raise FileNotFoundError(f"{ann_dir} does not exist")
    out = {}
    for p in sorted(ann_dir.glob("*.json")):
        try:
            out[int(p.stem)] = p
        except ValueError:
            raise SchemaError(f"{p}: annotation file name is not a scene id") from None
    return out


def read_dataset(dataset_dir) -> dict[int, SceneAnnotation]:
    scenes = {}
    for sid, p in annotation_paths(dataset_dir).items():
        scene = read_annotation(p)
        if scene.scene_id != sid:
            raise SchemaError(f"{p}: scene_id {scene.scene_id} does not match file name")
        scenes[sid] = scene
    return scenes


def read_image(dataset_dir, scene_id: int) -> np.ndarray:
    path = Path(dataset_dir) / "images" / f"{scene_stem(scene_id)}.png"
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def read_class_names(dataset_dir) -> list[str]:
    p = Path(dataset_dir) / "class_names.json"
    return json.loads(p.read_text()) if p.exists() else []
