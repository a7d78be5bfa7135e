"""
Occlusion graph, stacking statements and pick ordering.

An edge ``i -> j`` means "i is occluded by j"; its weight is the share of
i's full region where j is the visible instance. Picking a target clears its
occluders (and theirs) top-first before the target itself.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .compositor import SceneAnnotation, place_instance

OCCLUSION_THRESHOLD = 0.3
EDGE_THRESHOLD = 0.1


class PlanError(ValueError):
    pass


def occlusion_ratio(inst) -> float:
    """Occluded pixels over all pixels of the instance."""
    vis = int(np.count_nonzero(inst.visible))
    occ = int(np.count_nonzero(inst.occluded))
    if vis + occ == 0:
        raise PlanError(f"instance {inst.instance_id} has zero area")
    return occ / (vis + occ)


@dataclass
class OcclusionGraph:
    nodes: list[int]
    edges: dict[tuple[int, int], float] = field(default_factory=dict)
    edge_threshold: float = EDGE_THRESHOLD

    def occluders(self, i: int) -> list[int]:
        """Instances lying on ``i``, heaviest first."""
        out = [(w, j) for (a, j), w in self.edges.items() if a == i]
        return [j for w, j in sorted(out, key=lambda t: (-t[0], t[1]))]

    def occludees(self, j: int) -> list[int]:
        return sorted(a for (a, b) in self.edges if b == j)


def visible_owner(scene: SceneAnnotation) -> np.ndarray:
    """Per-pixel index into ``scene.instances`` of the visible instance, -1 where none."""
    owner = np.full(scene.shape, -1, dtype=np.int64)
    for k, inst in enumerate(scene.instances):
        owner[inst.visible] = k
    return owner


def build_graph(scene: SceneAnnotation, edge_threshold: float = EDGE_THRESHOLD) -> OcclusionGraph:
    """Edges ``i -> j`` where ``|full(i) & visible(j)| / |full(i)| > edge_threshold``."""
    owner = visible_owner(scene)
    n = len(scene.instances)
    ids = [inst.instance_id for inst in scene.instances]
    edges = {}
    for k, inst in enumerate(scene.instances):
        full = inst.full
        total = int(np.count_nonzero(full))
        if total == 0:
            continue
        under = owner[full]
        counts = np.bincount(under[under >= 0], minlength=n)
        counts[k] = 0
        for j in np.flatnonzero(counts):
            w = counts[j] / total
            if w > edge_threshold:
                edges[(ids[k], ids[j])] = float(w)
    return OcclusionGraph(ids, edges, edge_threshold)


def interpret_stacking(graph: OcclusionGraph, class_names: Mapping[int, str]) -> list[str]:
    """One "<upper> is on <lower>" sentence per edge, heaviest edge first."""
    ordered = sorted(graph.edges.items(), key=lambda kv: (-kv[1], kv[0]))
    return [f"{class_names[j]} is on {class_names[i]}" for (i, j), _ in ordered]


# -- re-stacking ------------------------------------------------------------

def stacking_order(scene: SceneAnnotation) -> list[int]:
    """
    Bottom-to-top instance ids consistent with every observed occlusion.
    Ties (and cycles) fall back to list order, so a scene whose list is
    already bottom-to-top comes back unchanged.
    """
    graph = build_graph(scene, 0.0)
    index = {inst.instance_id: k for k, inst in enumerate(scene.instances)}
    below = {i: set() for i in index}  # j -> instances j lies on
    for i, j in graph.edges:
        below[j].add(i)
    order, done = [], set()
    while len(order) < len(index):
        ready = [i for i in index if i not in done and below[i] <= done]
        pick = min(ready or (i for i in index if i not in done), key=index.__getitem__)
        order.append(pick)
        done.add(pick)
    return order


def remove_instances(scene: SceneAnnotation, removed) -> SceneAnnotation:
    """Take instances off the pile and recompute visible/occluded masks of the rest."""
    removed = set(removed)
    out = SceneAnnotation(scene.scene_id, scene.width, scene.height, [], scene.seed)
    for iid in stacking_order(scene):
        if iid in removed:
            continue
        inst = scene.by_id(iid)
        out = place_instance(out, inst.full, inst.object_class, inst.class_id, instance_id=iid)
    return out


# -- planning ---------------------------------------------------------------

@dataclass(frozen=True)
class PickStep:
    instance_id: int
    occlusion_ratio: float


@dataclass
class PickPlan:
    target: int
    order: list[int]
    rationale: list[PickStep]
    alternatives: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "order": list(self.order),
            "rationale": [{"instance_id": s.instance_id, "occlusion_ratio": s.occlusion_ratio}
                          for s in self.rationale],
            "alternatives": list(self.alternatives),
        }


def _collect_occluders(graph: OcclusionGraph, start: int, direct_only: bool) -> set[int]:
    seen = set()
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for j in graph.occluders(node):
            if j != start and j not in seen:
                seen.add(j)
                if not direct_only:
                    queue.append(j)
        if direct_only:
            break
    return seen


def _on_cycle(node: int, succ: dict[int, set[int]]) -> bool:
    stack, seen = list(succ[node]), set()
    while stack:
        n = stack.pop()
        if n == node:
            return True
        if n not in seen:
            seen.add(n)
            stack.extend(succ[n])
    return False


def _top_first(nodes: set[int], graph: OcclusionGraph, scene: SceneAnnotation) -> list[int]:
    """Order ``nodes`` so every occluder precedes what it lies on."""
    on_top_of = {n: {j for j in graph.occluders(n) if j in nodes} for n in nodes}
    order, done = [], set()
    while len(done) < len(nodes):
        remaining = {n: on_top_of[n] - done for n in nodes if n not in done}
        ready = sorted(n for n, occ in remaining.items() if not occ)
        if ready:
            pick = ready[0]
        else:
            # cycle: take the in-cycle instance with the largest visible area
            cyclic = [n for n in remaining if _on_cycle(n, remaining)]
            pick = min(cyclic, key=lambda n: (-int(np.count_nonzero(scene.by_id(n).visible)), n))
        order.append(pick)
        done.add(pick)
    return order


def plan_pick(graph: OcclusionGraph, scene: SceneAnnotation, target: int,
              occ_threshold: float = OCCLUSION_THRESHOLD, direct_only: bool = False,
              replan: bool = True) -> PickPlan:
    """
    Removal sequence ending with ``target``.

    A target whose occlusion ratio does not exceed ``occ_threshold`` is picked
    directly. Otherwise its occluders along graph edges (transitively unless
    ``direct_only``) are removed topmost first. With ``replan`` the removal is
    simulated on the scene and planning repeats until the target is clear,
    which covers occluders that only show up once the ones above are gone.
    """
    try:
        scene.by_id(target)
    except KeyError:
        raise PlanError(f"unknown target instance {target}") from None
    ratios = {inst.instance_id: occlusion_ratio(inst) for inst in scene.instances
              if inst.visible.any() or inst.occluded.any()}
    order: list[int] = []
    current, current_graph = scene, graph
    while occlusion_ratio(current.by_id(target)) > occ_threshold:
        blockers = _collect_occluders(current_graph, target, direct_only)
        if not blockers:
            if not replan:
                break
            loose = build_graph(current, 0.0).occluders(target)
            if not loose:
                break
            blockers = {loose[0]} | _collect_occluders(current_graph, loose[0], direct_only)
            blockers.discard(target)
        steps = _top_first(blockers, current_graph, current)
        order.extend(steps)
        if not replan:
            break
        current = remove_instances(current, steps)
        current_graph = build_graph(current, graph.edge_threshold)
    order.append(target)
    return PickPlan(target, order, [PickStep(i, ratios.get(i, 0.0)) for i in order])


def plan_for_class(scene: SceneAnnotation, class_name: str,
                   occ_threshold: float = OCCLUSION_THRESHOLD,
                   edge_threshold: float = EDGE_THRESHOLD, **kwargs) -> PickPlan:
    """Plan for the least-occluded instance of ``class_name``; the others are listed as alternatives."""
    candidates = [i for i in scene.instances if i.object_class == class_name]
    if not candidates:
        raise PlanError(f"no instance of class {class_name!r} in scene {scene.scene_id}")
    ranked = sorted(candidates, key=lambda i: (occlusion_ratio(i), i.instance_id))
    graph = build_graph(scene, edge_threshold)
    plan = plan_pick(graph, scene, ranked[0].instance_id, occ_threshold, **kwargs)
    plan.alternatives = [i.instance_id for i in ranked[1:]]
    return plan
