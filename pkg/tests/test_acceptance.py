"""
Acceptance suite: one recorded pass/fail line per criterion, at its stated tolerance.
Lines are gathered in the "acceptance criteria" section of the pytest summary.
"""
import math
import os
import time
from pathlib import Path

import numpy as np

from occlusynth import dataset as ds
from occlusynth.augment import DEFAULT_RANGES, make_rng, sample_params
from occlusynth.cli import main
from occlusynth.compositor import (
    InstanceAnnotation, SceneConfig, scene_seed, scene_violations, stack_scene, synthesize_scene,
)
from occlusynth.metrics import MatchResult, detection_quality, evaluate, segmentation_quality
from occlusynth.occlusion_planner import build_graph, occlusion_ratio, plan_pick

from oracles import oracle_evaluate, perturb_prediction, pixel_attribution_graph, random_full_mask, random_gt_scene, stack

TOL = 1e-12


def test_ac1_published_scores_not_reproduced(criterion):
    criterion(
        "AC1 published mPQ tables", True,
        "not reproducible here: they need trained segmentation networks and a human-annotated "
        "warehouse dataset; acceptance rests on the property checks AC2-AC9",
        status="N/A",
    )


def test_ac2_partition_invariants(catalog, criterion):
    cfg = SceneConfig(width=640, height=480, n_instances=(1, 8), master_seed=2024)
    t = time.perf_counter()
    bad = []
    for i in range(1000):
        _, s = synthesize_scene(catalog, cfg, scene_seed(cfg.master_seed, i), scene_id=i)
        bad += scene_violations(s)
    dt = time.perf_counter() - t
    criterion("AC2 partition invariants", not bad and dt < 60,
              f"1000 scenes 640x480, {len(bad)} violations, {dt:.1f} s (limit 60 s)")


def _max_field_error(report, oracle):
    per_class, means = oracle
    if set(report.per_class) != set(per_class):
        return math.inf
    err = 0.0
    for name, s in report.per_class.items():
        o = per_class[name]
        if (s.tp, s.fp, s.fn) != (o["tp"], o["fp"], o["fn"]):
            return math.inf
        err = max([err] + [abs(getattr(s, k) - o[k]) for k in ("dq", "sq", "sq_multi", "pq", "pq_multi")])
    return max([err] + [abs(getattr(report, k) - v) for k, v in means.items()])


def test_ac3_metric_oracle(criterion):
    rng = np.random.default_rng(2718)
    worst = 0.0
    for trial in range(200):
        gt = {i: random_gt_scene(rng, i, shape=(16, 16), max_instances=4) for i in range(int(rng.integers(1, 4)))}
        pred = {i: perturb_prediction(rng, s, max_instances=4) for i, s in gt.items()}
        for region in ("bbox", "image"):
            worst = max(worst, _max_field_error(evaluate(pred, gt, region), oracle_evaluate(pred, gt, region)))
    criterion("AC3 metric oracle", worst <= TOL, f"200 trials x 2 regions, max |diff| = {worst:.3g} (tol 1e-12)")


def test_ac4_self_evaluation(catalog, tmp_path, criterion):
    cfg = SceneConfig(width=320, height=240, master_seed=4)
    out = ds.prepare_dataset_dir(tmp_path / "gt", catalog.class_names)
    for i in range(25):
        img, s = synthesize_scene(catalog, cfg, scene_seed(cfg.master_seed, i), scene_id=i)
        ds.write_scene(out, img, s)
    gt = ds.read_dataset(out)
    values = []
    for region in ("bbox", "image"):
        r = evaluate(gt, gt, region)
        values += [r.mPQ, r.mDQ, r.mSQ, r.mSQ_multi]
    rng = np.random.default_rng(44)
    for _ in range(20):
        d = {i: random_gt_scene(rng, i) for i in range(4)}
        r = evaluate(d, d)
        values += [r.mPQ, r.mDQ, r.mSQ, r.mSQ_multi]
    ok = all(v == 1.0 for v in values)
    criterion("AC4 self-evaluation", ok, f"{len(values)} means, all exactly 1.0: {ok}")


def test_ac5_formula_pins(criterion):
    dummy = InstanceAnnotation(0, "a", np.ones((2, 2), bool), np.zeros((2, 2), bool))
    dq = detection_quality(MatchResult([(dummy, dummy)] * 2, [dummy], [dummy]))
    shape = (10, 10)

    def rect(y0, y1, x0, x1):
        m = np.zeros(shape, bool)
        m[y0:y1, x0:x1] = True
        return InstanceAnnotation(0, "a", m, np.zeros(shape, bool))

    # visible IoUs 0.6 and 0.8
    m = MatchResult([(rect(0, 5, 0, 3), rect(0, 5, 0, 5)), (rect(5, 10, 5, 9), rect(5, 10, 5, 10))])
    sq = segmentation_quality(m, "single")
    pq_multi = (2 / 3) * 0.6
    ok = dq == 2 / 3 and abs(sq - 0.7) <= 1e-15 and abs(pq_multi - 0.4) <= 1e-15
    criterion("AC5 formula pins", ok, f"DQ(2,1,1) = {dq!r}, SQ{{0.6,0.8}} = {sq!r}, (2/3)*0.6 = {pq_multi!r}")


def test_ac6_augmentation_ranges(criterion):
    rng = make_rng(6)
    draws = [sample_params(rng) for _ in range(100_000)]
    ranges = DEFAULT_RANGES.to_dict()
    worst_range, worst_mean = True, 0.0
    for name, (lo, hi) in ranges.items():
        v = np.array([getattr(p, name) for p in draws])
        worst_range &= bool(((v >= lo) & (v <= hi)).all())
        # deviation of the empirical mean from the midpoint, relative to the interval width
        worst_mean = max(worst_mean, abs(v.mean() - (lo + hi) / 2) / (hi - lo))
    criterion("AC6 augmentation ranges", worst_range and worst_mean <= 0.02,
              f"1e5 draws, all in range: {worst_range}, max |mean - mid| / width = {worst_mean:.4f} (tol 0.02)")


def _tree(root):
    root = Path(root)
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_ac7_determinism(catalog_dir, tmp_path, criterion):
    args = ["synth", "--catalog", str(catalog_dir), "-n", "24", "--seed", "77"]
    codes = [main(args + ["--out", str(tmp_path / "j1"), "--jobs", "1"]),
             main(args + ["--out", str(tmp_path / "j8"), "--jobs", "8"])]
    a, b = _tree(tmp_path / "j1"), _tree(tmp_path / "j8")
    ok = codes == [0, 0] and a == b and len(a) == 24 * 2 + 2
    criterion("AC7 determinism", ok, f"jobs 1 vs 8, {len(a)} files, byte-identical: {a == b}")


def test_ac8_planner_scenario(criterion):
    shape = (240, 320)
    base = np.zeros(shape, bool)
    base[40:200, 40:280] = True
    target = np.zeros(shape, bool)
    target[100:140, 80:240] = True
    yy, xx = np.mgrid[:shape[0], :shape[1]]
    occluder = (yy - 120) ** 2 + (xx - 200) ** 2 <= 45 ** 2
    s = stack_scene(0, shape, [(base, "tray", 0), (target, "mug", 1), (occluder, "lid", 2)])
    ratio = occlusion_ratio(s.by_id(1))
    plan = plan_pick(build_graph(s), s, 1)
    ok = ratio > 0.3 and plan.order == [2, 1] and 0 not in plan.order
    criterion("AC8 planner scenario", ok, f"target occlusion {ratio:.3f}, plan {plan.order} (want [2, 1], base 0 absent)")


def test_ac9_graph_oracle(criterion):
    rng = np.random.default_rng(99)
    shape = (64, 64)
    worst, edge_sets_equal = 0.0, True
    for sid in range(500):
        n = int(rng.integers(1, 6))
        s = stack([random_full_mask(rng, shape, max_rects=3) for _ in range(n)], ["o"] * n, sid, shape)
        want = pixel_attribution_graph(s)
        got = build_graph(s, 0.0).edges
        thresholded = build_graph(s).edges
        edge_sets_equal &= set(got) == set(want)
        edge_sets_equal &= set(thresholded) == {k for k, w in want.items() if w > 0.1}
        for k in set(got) & set(want):
            worst = max(worst, abs(got[k] - want[k]))
    criterion("AC9 graph oracle", edge_sets_equal and worst <= TOL,
              f"500 scenes 64x64, edge sets equal: {edge_sets_equal}, max |w diff| = {worst:.3g}")


def test_ac10_throughput(catalog_dir, tmp_path, criterion):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(f"catalog: {catalog_dir}\nn_instances: [8, 8]\n")
    cores = os.cpu_count() or 1
    jobs = min(4, cores)
    n = 60
    t = time.perf_counter()
    code = main(["synth", "--config", str(cfg), "--out", str(tmp_path / "out"), "-n", str(n), "--jobs", str(jobs)])
    rate = n / (time.perf_counter() - t)
    criterion("AC10 throughput", code == 0 and rate >= 10,
              f"{rate:.1f} scenes/s at 640x480 with 8 instances incl. writes, jobs={jobs} on {cores} core(s) (target 10)")
