"""
occlusynth command line.

Exit codes: 0 success, 1 validation failure, 2 I/O failure.
``--jobs`` defaults to ``$OCCLUSYNTH_JOBS`` (else 1); results never depend on it.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import cv2
import numpy as np

from . import dataset as ds
from .compositor import SceneAnnotation, rasterize_density, scene_seed, scene_violations, synthesize_scene
from .config import ConfigError, RunConfig, load_config
from .ingest import CatalogError, ObjectCatalog, load_catalog
from .metrics import EvaluationError, evaluate
from .occlusion_planner import PlanError, build_graph, interpret_stacking, plan_for_class, plan_pick

logger = logging.getLogger("occlusynth")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class Failure(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        super().__init__(message)
        self.code = code


def default_jobs() -> int:
    raw = os.environ.get("OCCLUSYNTH_JOBS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _parallel_map(fn, items, jobs, initializer=None, initargs=()):
    """Ordered map; runs in-process for a single job."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        if initializer is not None:
            initializer(*initargs)
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (jobs * 4))
    with ProcessPoolExecutor(max_workers=jobs, initializer=initializer, initargs=initargs) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def _catalog(path, threshold, min_area, jobs) -> ObjectCatalog:
    if path is None:
        raise Failure("no catalog given (use --catalog or set 'catalog' in the config)")
    if not Path(path).is_dir():
        raise Failure(f"catalog directory {path} does not exist", EXIT_IO)
    try:
        return load_catalog(path, threshold, min_area, jobs)
    except CatalogError as e:
        raise Failure(str(e), EXIT_IO if isinstance(e.__cause__, OSError) else EXIT_INVALID) from e


# -- extract ----------------------------------------------------------------

def cmd_extract(args) -> int:
    catalog = _catalog(args.catalog, args.fg_threshold, args.min_area, args.jobs)
    out = Path(args.out)
    summary = {}
    for name in catalog.class_names:
        (out / name).mkdir(parents=True, exist_ok=True)
        rows = []
        for view in catalog.entries[name]:
            ds.write_mask(out / name / f"{view.view_id}.png", view.foreground)
            h, w = view.shape
            rows.append({"view_id": view.view_id, "height": h, "width": w,
                         "area": int(np.count_nonzero(view.foreground))})
        summary[name] = rows
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    print(f"{len(catalog.class_names)} classes, {sum(len(v) for v in summary.values())} views -> {out}")
    return EXIT_OK


# -- synth ------------------------------------------------------------------

_worker: dict = {}


def _init_synth(catalog, cfg, out_dir):
    _worker.update(catalog=catalog, cfg=cfg, out=Path(out_dir))


def _synth_one(index: int) -> tuple[int, int, int]:
    cfg = _worker["cfg"]
    seed = scene_seed(cfg.master_seed, index)
    image, scene = synthesize_scene(_worker["catalog"], cfg, seed, scene_id=index)
    ds.write_scene(_worker["out"], image, scene)
    return index, seed, len(scene.instances)


def cmd_synth(args) -> int:
    run = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        run = replace(run, scene=replace(run.scene, master_seed=args.seed))
    catalog_path = args.catalog or run.catalog
    threshold = run.fg_threshold if args.fg_threshold is None else args.fg_threshold
    min_area = run.min_area if args.min_area is None else args.min_area
    catalog = _catalog(catalog_path, threshold, min_area, args.jobs)
    if args.n_scenes < 0:
        raise Failure("--n-scenes must be non-negative")
    out = ds.prepare_dataset_dir(args.out, catalog.class_names)
    results = _parallel_map(_synth_one, range(args.n_scenes), args.jobs,
                            _init_synth, (catalog, run.scene, out))
    echo = run.to_dict()
    echo.update(catalog=str(catalog_path), fg_threshold=threshold, min_area=min_area)
    manifest = {
        "config": echo,
        "n_scenes": args.n_scenes,
        "class_names": catalog.class_names,
        "scenes": [{"scene_id": i, "seed": s, "n_instances": n} for i, s, n in results],
    }
    ds.write_manifest(out, manifest)
    print(f"wrote {args.n_scenes} scenes to {out}")
    return EXIT_OK


# -- check ------------------------------------------------------------------

def _check_one(item) -> list[str]:
    sid, path = item
    try:
        scene = ds.read_annotation(path)
    except ds.SchemaError as e:
        return [f"scene {sid}: {e}"]
    except OSError as e:
        return [f"scene {sid}: unreadable annotation {path}: {e}"]
    problems = []
    if scene.scene_id != sid:
        problems.append(f"scene {sid}: scene_id {scene.scene_id} does not match file name")
    problems += scene_violations(scene)
    img_path = Path(path).parent.parent / "images" / f"{ds.scene_stem(sid)}.png"
    if img_path.exists():
        try:
            h, w = ds.image_size(img_path)
            if (h, w) != scene.shape:
                problems.append(f"scene {sid}: image is {w}x{h}, annotation {scene.width}x{scene.height}")
        except OSError as e:
            problems.append(f"scene {sid}: unreadable image {img_path}: {e}")
    return problems


def cmd_check(args) -> int:
    try:
        paths = ds.annotation_paths(args.dataset)
    except FileNotFoundError as e:
        raise Failure(str(e), EXIT_IO) from e
    problems = [p for batch in _parallel_map(_check_one, paths.items(), args.jobs) for p in batch]
    for p in problems:
        print(p)
    print(f"{len(paths)} scenes checked, {len(problems)} violations")
    return EXIT_OK if not problems else EXIT_INVALID


# -- eval -------------------------------------------------------------------

def _read_one(path) -> SceneAnnotation:
    return ds.read_annotation(path)


def _read_dataset(directory, jobs) -> dict[int, SceneAnnotation]:
    try:
        paths = ds.annotation_paths(directory)
    except FileNotFoundError as e:
        raise Failure(str(e), EXIT_IO) from e
    scenes = _parallel_map(_read_one, paths.values(), jobs)
    out = {}
    for (sid, path), scene in zip(paths.items(), scenes):
        if scene.scene_id != sid:
            raise Failure(f"{path}: scene_id {scene.scene_id} does not match file name")
        out[sid] = scene
    return out


def cmd_eval(args) -> int:
    gt = _read_dataset(args.gt, args.jobs)
    pred = _read_dataset(args.pred, args.jobs)
    report = evaluate(pred, gt, region=args.region)
    print(report.table())
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


# -- density ----------------------------------------------------------------

def write_density_png(path, channels: np.ndarray) -> None:
    """Planes (background, visible, occluded) as the R, G, B channels of a 16-bit PNG."""
    if channels.max(initial=0) > np.iinfo(np.uint16).max:
        raise Failure("density counts exceed 16 bits")
    planes = np.moveaxis(channels.astype(np.uint16), 0, -1)
    if not cv2.imwrite(str(path), np.ascontiguousarray(planes[..., ::-1])):
        raise Failure(f"could not write {path}", EXIT_IO)


def read_density_png(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise Failure(f"could not read {path}", EXIT_IO)
    return np.moveaxis(img[..., ::-1], -1, 0).astype(np.float64)


def cmd_density(args) -> int:
    scene = ds.read_annotation(args.annotation)
    density = rasterize_density(scene.instances, scene.shape)
    out = Path(args.out)
    write_density_png(out, density.channels)
    summary = {
        "scene_id": scene.scene_id,
        "width": scene.width,
        "height": scene.height,
        "n_instances": len(scene.instances),
        "planes": ["background", "visible", "occluded"],
        "max": [int(p.max(initial=0)) for p in density.channels],
        "sum": [int(p.sum()) for p in density.channels],
    }
    out.with_suffix(".json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary))
    return EXIT_OK


# -- plan -------------------------------------------------------------------

def cmd_plan(args) -> int:
    scene = ds.read_annotation(args.annotation)
    graph = build_graph(scene, args.edge_threshold)
    kwargs = dict(direct_only=args.direct_only, replan=not args.no_replan)
    if args.target_id is not None:
        plan = plan_pick(graph, scene, args.target_id, args.occ_threshold, **kwargs)
    elif args.target_class is not None:
        plan = plan_for_class(scene, args.target_class, args.occ_threshold, args.edge_threshold, **kwargs)
    else:
        raise Failure("give --target-class or --target-id")
    names = {i.instance_id: i.object_class for i in scene.instances}
    result = plan.to_dict()
    result["statements"] = interpret_stacking(graph, names)
    text = json.dumps(result, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return EXIT_OK


# -- viz --------------------------------------------------------------------

def instance_color(instance_id: int) -> np.ndarray:
    """Bright colour derived from a hash of the id, identical across runs."""
    digest = hashlib.blake2b(str(int(instance_id)).encode(), digest_size=3).digest()
    return 64 + np.frombuffer(digest, np.uint8).astype(np.uint16) * 191 // 255


def overlay(shape, masks) -> np.ndarray:
    out = np.zeros((*shape, 3), np.uint8)
    for iid, m in masks:
        out[m] = instance_color(iid)
    return out


def cmd_viz(args) -> int:
    annotations = ds.annotation_paths(args.dataset)
    if args.scene_id not in annotations:
        raise Failure(f"scene {args.scene_id} not found in {args.dataset}", EXIT_IO)
    scene = ds.read_annotation(annotations[args.scene_id])
    image = ds.read_image(args.dataset, args.scene_id)
    out = Path(args.out)
    stem = out.with_suffix("")
    paths = {
        "composite": stem.with_name(stem.name + "_composite.png"),
        "visible": stem.with_name(stem.name + "_visible.png"),
        "occluded": stem.with_name(stem.name + "_occluded.png"),
    }
    out.parent.mkdir(parents=True, exist_ok=True)
    ds.write_image(paths["composite"], image)
    ds.write_image(paths["visible"], overlay(scene.shape, [(i.instance_id, i.visible) for i in scene.instances]))
    ds.write_image(paths["occluded"], overlay(scene.shape, [(i.instance_id, i.occluded) for i in scene.instances]))
    for p in paths.values():
        print(p)
    return EXIT_OK


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="occlusynth", description=__doc__.splitlines()[1])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def jobs(p):
        p.add_argument("--jobs", "-j", type=int, default=default_jobs())

    p = sub.add_parser("extract", help="foreground masks for every catalog view")
    p.add_argument("--catalog", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fg-threshold", type=int, default=25)
    p.add_argument("--min-area", type=int, default=64)
    jobs(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config")
    p.add_argument("--catalog")
    p.add_argument("--out", required=True)
    p.add_argument("--n-scenes", "-n", type=int, required=True)
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--fg-threshold", type=int)
    p.add_argument("--min-area", type=int)
    jobs(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("check", help="validate a dataset's annotations")
    p.add_argument("dataset")
    jobs(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--region", choices=("bbox", "image"), default="bbox")
    p.add_argument("--out")
    jobs(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("density", help="per-pixel instance counts as a 16-bit PNG")
    p.add_argument("--annotation", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("plan", help="pick order for a target")
    p.add_argument("--annotation", required=True)
    p.add_argument("--target-class")
    p.add_argument("--target-id", type=int)
    p.add_argument("--occ-threshold", type=float, default=0.3)
    p.add_argument("--edge-threshold", type=float, default=0.1)
    p.add_argument("--direct-only", action="store_true")
    p.add_argument("--no-replan", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("viz", help="composite and mask overlays for one scene")
    p.add_argument("--dataset", required=True)
    p.add_argument("--scene-id", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_viz)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except Failure as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (ConfigError, ds.SchemaError, EvaluationError, PlanError, CatalogError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
