"""
Planning a pick under occlusion
===============================

A target that is more than 30% hidden cannot be grasped directly. The
occlusion graph says which instances lie on it, and the plan removes them
topmost first.
"""
import numpy as np

from occlusynth import build_graph, interpret_stacking, occlusion_ratio, plan_pick
from occlusynth.compositor import stack_scene

shape = (240, 320)
yy, xx = np.mgrid[:shape[0], :shape[1]]
tray = (yy > 40) & (yy < 200) & (xx > 40) & (xx < 280)
mug = (yy > 100) & (yy < 140) & (xx > 80) & (xx < 240)
lid = (yy - 120) ** 2 + (xx - 200) ** 2 <= 45 ** 2
scene = stack_scene(0, shape, [(tray, "tray", 0), (mug, "mug", 1), (lid, "lid", 2)])

names = {i.instance_id: i.object_class for i in scene.instances}
for inst in scene.instances:
    print(f"{inst.object_class:<12} occlusion {occlusion_ratio(inst):.2f}")

graph = build_graph(scene)
for (i, j), w in sorted(graph.edges.items()):
    print(f"  {names[i]} occluded by {names[j]}: {w:.2f}")
print("\n".join(interpret_stacking(graph, names)))

plan = plan_pick(graph, scene, 1)
print("pick order:", [names[i] for i in plan.order])
