"""Scripted demonstrations: piecewise-linear waypoint scripts executed at a
constant end-effector speed.

Every script starts at the home pose above the robot base. Task segments:
  reach       above target -> descend near the object
  lift        grasp (descend, close gripper) -> raise 0.12 m
  move_*      grasp -> raise 0.05 m -> carry 0.12 m along -y (left) / +y (right)
  insert      lift -> carry above the open drawer -> descend -> release -> ascend
  close       insert -> approach the drawer handle -> push the drawer shut
Intermediate waypoints get uniform jitter; home and the final push do not.
"""

import math

import numpy as np

from internal.models.errors import GenerationError
from internal.scenegen.scene import DRAWER_TRAVEL, OBJECT_REST_Z, SceneSpec, WORKSPACE_HALF

SPEED = 0.02            # meters per step
WAYPOINT_JITTER = 0.005
REACH_SLACK = 0.10      # reachable band beyond the workspace edge
MAX_EE_Z = 0.5

PRE_GRASP_Z = 0.10
REACH_Z = 0.05
LIFT_HEIGHT = 0.12
CARRY_HEIGHT = 0.05
MOVE_DISTANCE = 0.12
TRANSPORT_Z = 0.14
RELEASE_Z = 0.06
RETREAT_HEIGHT = 0.06
HANDLE_APPROACH_GAP = 0.01
PUSH_OVERTRAVEL = 0.03


class _Script:
    """Accumulates (x, y, z, g) rows while walking waypoints."""

    def __init__(self, home: tuple, rng: np.random.Generator):
        self.rng = rng
        self.position = np.asarray(home, dtype=np.float64)
        self.grip = 0.0
        self.rows = [np.append(self.position, self.grip)]

    def move_to(self, point, jitter: bool = True):
        target = np.asarray(point, dtype=np.float64)
        if jitter:
            target = target + self.rng.uniform(-WAYPOINT_JITTER, WAYPOINT_JITTER, size=3)
        if np.any(np.abs(target[:2]) > WORKSPACE_HALF + REACH_SLACK) or not 0.0 <= target[2] <= MAX_EE_Z:
            raise GenerationError(f"waypoint {np.round(target, 4).tolist()} is unreachable")
        n = max(1, math.ceil(float(np.linalg.norm(target - self.position)) / SPEED))
        start = self.position
        for i in range(1, n + 1):
            self.rows.append(np.append(start + (target - start) * (i / n), self.grip))
        self.position = target

    def offset(self, dx=0.0, dy=0.0, dz=0.0) -> np.ndarray:
        return self.position + np.array([dx, dy, dz])

    def set_gripper(self, g: float):
        self.grip = g
        self.rows.append(np.append(self.position, self.grip))

    def steps(self) -> np.ndarray:
        return np.stack(self.rows).astype(np.float64)


def _grasp(script: _Script, ox: float, oy: float):
    script.move_to((ox, oy, PRE_GRASP_Z))
    script.move_to((ox, oy, OBJECT_REST_Z))
    script.set_gripper(1.0)


def synthesize_trajectory(scene: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    """(T, 4) demonstration for the scene's task: x, y, z and gripper g."""
    ox, oy = scene.target.position
    script = _Script(scene.home, rng)
    task = scene.task

    if task == "reach":
        script.move_to((ox, oy, PRE_GRASP_Z))
        script.move_to((ox, oy, REACH_Z))
        return script.steps()

    _grasp(script, ox, oy)
    if task == "lift":
        script.move_to(script.offset(dz=LIFT_HEIGHT))
    elif task in ("move_left", "move_right"):
        script.move_to(script.offset(dz=CARRY_HEIGHT))
        sign = -1.0 if task == "move_left" else 1.0
        script.move_to(script.offset(dy=sign * MOVE_DISTANCE))
    else:
        dx, dy = scene.drawer.position
        script.move_to(script.offset(dz=LIFT_HEIGHT))
        script.move_to((dx, dy, TRANSPORT_Z))
        script.move_to((dx, dy, RELEASE_Z))
        script.set_gripper(0.0)
        script.move_to(script.offset(dz=RETREAT_HEIGHT))
        if task == "reach_lift_insert_close":
            hx, hy, hz = scene.drawer.handle
            script.move_to((hx - HANDLE_APPROACH_GAP, hy, hz))
            script.move_to(
                (hx + DRAWER_TRAVEL + PUSH_OVERTRAVEL, script.position[1], hz), jitter=False,
            )
    return script.steps()
