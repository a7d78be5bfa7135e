"""
Panoptic-quality evaluation for instance occlusion segmentation.

Predictions are matched to ground truth on visible masks (IoU strictly above
0.5, so matches are unique up to exact ties). Per object class::

    DQ       = |TP| / (|TP| + |FP|/2 + |FN|/2)
    SQ       = mean over TP of visible-mask IoU
    SQ_multi = mean over TP of the 3-class mIoU (background, visible, occluded)
    PQ       = DQ * SQ,   PQ_multi = DQ * SQ_multi

Class means are taken over every class that appears in the ground truth or
the predictions. ``mPQ`` is the mean of PQ_multi.
"""
from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .compositor import InstanceAnnotation, SceneAnnotation
from .mask_core import BoundingBox, MaskShapeError, iou, tight_bbox

MATCH_THRESHOLD = 0.5
REGION_PAD = 8


class MaskClass(enum.Enum):
    BACKGROUND = 0
    VISIBLE = 1
    OCCLUDED = 2


class EvaluationError(ValueError):
    pass


@dataclass
class MatchResult:
    tp: list[tuple[InstanceAnnotation, InstanceAnnotation]] = field(default_factory=list)
    fp: list[InstanceAnnotation] = field(default_factory=list)
    fn: list[InstanceAnnotation] = field(default_factory=list)

    def extend(self, other: "MatchResult") -> None:
        self.tp.extend(other.tp)
        self.fp.extend(other.fp)
        self.fn.extend(other.fn)

    @property
    def counts(self) -> tuple[int, int, int]:
        return len(self.tp), len(self.fp), len(self.fn)


def _check_shapes(instances: Sequence[InstanceAnnotation], shape=None):
    for inst in instances:
        for m in (inst.visible, inst.occluded):
            if shape is None:
                shape = m.shape
            elif m.shape != shape:
                raise MaskShapeError(f"instance {inst.instance_id}: mask {m.shape} vs {shape}")
    return shape


def match_instances(pred: Sequence[InstanceAnnotation], gt: Sequence[InstanceAnnotation],
                    threshold: float = MATCH_THRESHOLD) -> MatchResult:
    """
    Greedy one-to-one matching on visible-mask IoU > ``threshold``.

    Without scores, candidate pairs are taken in descending IoU; when every
    prediction carries a ``score``, predictions are visited in descending
    score and take their best unmatched ground truth. Ties go to the lower
    instance id.
    """
    shape = _check_shapes(gt)
    _check_shapes(pred, shape)
    pred = sorted(pred, key=lambda p: p.instance_id)
    gt = sorted(gt, key=lambda g: g.instance_id)
    ious = np.array([[iou(p.visible, g.visible) for g in gt] for p in pred]).reshape(len(pred), len(gt))
    used_p, used_g = set(), set()
    pairs = []
    if pred and all(p.score is not None for p in pred):
        order = sorted(range(len(pred)), key=lambda i: (-pred[i].score, pred[i].instance_id))
        for i in order:
            best, best_iou = None, threshold
            for j in range(len(gt)):
                if j not in used_g and ious[i, j] > best_iou:
                    best, best_iou = j, ious[i, j]
            if best is not None:
                used_p.add(i)
                used_g.add(best)
                pairs.append((i, best))
    else:
        cand = [(-ious[i, j], i, j) for i in range(len(pred)) for j in range(len(gt)) if ious[i, j] > threshold]
        for _, i, j in sorted(cand):
            if i not in used_p and j not in used_g:
                used_p.add(i)
                used_g.add(j)
                pairs.append((i, j))
    return MatchResult(
        tp=[(pred[i], gt[j]) for i, j in pairs],
        fp=[p for i, p in enumerate(pred) if i not in used_p],
        fn=[g for j, g in enumerate(gt) if j not in used_g],
    )


def detection_quality(m: MatchResult) -> float:
    tp, fp, fn = m.counts
    denom = tp + 0.5 * fp + 0.5 * fn
    if denom == 0:
        return 1.0
    return tp / denom


def eval_region(p: InstanceAnnotation, g: InstanceAnnotation, region="bbox") -> BoundingBox:
    """
    Support of the background class for mIoU: ``"bbox"`` is the box around
    both full regions grown by 8 px (clipped), ``"image"`` the whole canvas.
    """
    h, w = g.shape
    if region == "image":
        return BoundingBox(0, 0, w, h)
    if region == "bbox":
        box = tight_bbox(p.full).union(tight_bbox(g.full))
        return box.expand(REGION_PAD, h, w)
    raise ValueError(f"unknown evaluation region {region!r}")


def instance_miou(p: InstanceAnnotation, g: InstanceAnnotation, region="bbox") -> float:
    """Mean IoU over background / visible / occluded masks inside the evaluation region."""
    if p.shape != g.shape or p.occluded.shape != g.occluded.shape:
        raise MaskShapeError(f"mask shapes differ: {p.shape} vs {g.shape}")
    box = region if isinstance(region, BoundingBox) else eval_region(p, g, region)
    if box.is_empty:
        raise EvaluationError(f"empty evaluation region for pair ({p.instance_id}, {g.instance_id})")
    sl = box.slices()
    pv, po = p.visible[sl], p.occluded[sl]
    gv, go = g.visible[sl], g.occluded[sl]
    ious = (
        iou(~(pv | po), ~(gv | go)),
        iou(pv, gv),
        iou(po, go),
    )
    return sum(ious) / len(MaskClass)


def segmentation_quality(m: MatchResult, mode: str = "single", region="bbox") -> float:
    if not m.tp:
        return 0.0
    if mode == "single":
        total = sum(iou(p.visible, g.visible) for p, g in m.tp)
    elif mode == "multi":
        total = sum(instance_miou(p, g, region) for p, g in m.tp)
    else:
        raise ValueError(f"mode must be 'single' or 'multi', got {mode!r}")
    return total / len(m.tp)


@dataclass(frozen=True)
class ClassScores:
    dq: float
    sq: float
    sq_multi: float
    pq: float
    pq_multi: float
    tp: int
    fp: int
    fn: int

    @classmethod
    def from_match(cls, m: MatchResult, region="bbox") -> "ClassScores":
        dq = detection_quality(m)
        sq = segmentation_quality(m, "single", region)
        sq_multi = segmentation_quality(m, "multi", region)
        tp, fp, fn = m.counts
        return cls(dq, sq, sq_multi, dq * sq, dq * sq_multi, tp, fp, fn)


@dataclass(frozen=True)
class MetricReport:
    per_class: dict[str, ClassScores]
    mDQ: float
    mSQ: float
    mSQ_multi: float
    mPQ: float
    mPQ_single: float
    region: str = "bbox"

    def to_dict(self) -> dict:
        return {
            "per_class": {k: asdict(v) for k, v in sorted(self.per_class.items())},
            "mPQ": self.mPQ,
            "mPQ_single": self.mPQ_single,
            "mSQ": self.mSQ,
            "mSQ_multi": self.mSQ_multi,
            "mDQ": self.mDQ,
            "region": self.region,
        }

    def table(self) -> str:
        """Plain-text summary: one row per class plus the mean row."""
        head = f"{'class':<24}{'PQ':>8}{'SQ':>8}{'SQ_multi':>10}{'DQ':>8}{'TP':>6}{'FP':>6}{'FN':>6}"
        lines = [head, "-" * len(head)]
        for name, s in sorted(self.per_class.items()):
            lines.append(f"{name[:23]:<24}{s.pq_multi:8.4f}{s.sq:8.4f}{s.sq_multi:10.4f}{s.dq:8.4f}"
                         f"{s.tp:6d}{s.fp:6d}{s.fn:6d}")
        lines.append("-" * len(head))
        lines.append(f"{'mean':<24}{self.mPQ:8.4f}{self.mSQ:8.4f}{self.mSQ_multi:10.4f}{self.mDQ:8.4f}")
        lines.append(f"mPQ {self.mPQ:.4f}  mSQ {self.mSQ:.4f}  mSQ_multi {self.mSQ_multi:.4f}  mDQ {self.mDQ:.4f}")
        return "\n".join(lines)


def _by_class(instances):
    groups = defaultdict(list)
    for inst in instances:
        groups[inst.object_class].append(inst)
    return groups


def _mean(values):
    values = list(values)
    return sum(values) / len(values) if values else 1.0


def evaluate(pred_dataset: Mapping[int, SceneAnnotation], gt_dataset: Mapping[int, SceneAnnotation],
             region: str = "bbox", threshold: float = MATCH_THRESHOLD) -> MetricReport:
    """
    Match per scene and class, pool TP/FP/FN over the dataset per class,
    then score each class and average.
    """
    missing_pred = sorted(set(gt_dataset) - set(pred_dataset))
    missing_gt = sorted(set(pred_dataset) - set(gt_dataset))
    if missing_pred or missing_gt:
        raise EvaluationError(
            f"scene ids differ: missing predictions for {missing_pred}, missing ground truth for {missing_gt}"
        )
    pooled: dict[str, MatchResult] = defaultdict(MatchResult)
    for sid in sorted(gt_dataset):
        g_scene, p_scene = gt_dataset[sid], pred_dataset[sid]
        if g_scene.shape != p_scene.shape:
            raise EvaluationError(f"scene {sid}: prediction size {p_scene.shape} vs ground truth {g_scene.shape}")
        g_groups, p_groups = _by_class(g_scene.instances), _by_class(p_scene.instances)
        for name in sorted(set(g_groups) | set(p_groups)):
            pooled[name].extend(match_instances(p_groups.get(name, []), g_groups.get(name, []), threshold))
    per_class = {name: ClassScores.from_match(m, region) for name, m in sorted(pooled.items())}
    scores = per_class.values()
    return MetricReport(
        per_class=per_class,
        mDQ=_mean(s.dq for s in scores),
        mSQ=_mean(s.sq for s in scores),
        mSQ_multi=_mean(s.sq_multi for s in scores),
        mPQ=_mean(s.pq_multi for s in scores),
        mPQ_single=_mean(s.pq for s in scores),
        region=region,
    )
