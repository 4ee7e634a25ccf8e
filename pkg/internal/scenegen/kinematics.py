"""Kinematic attachment model and geometric task-success checker.

simulate_kinematics walks a trajectory step by step:
  - gripper closes (g crosses 0.5 upward) within ATTACH_RADIUS of an object
    -> the nearest such object attaches with a rigid offset
  - gripper opens with an object attached -> the object keeps its (x, y) and
    drops to the drawer floor when over an open cavity, else to the table
  - with nothing attached, touching the drawer handle and then advancing
    DRAWER_TRAVEL along +x closes the drawer; objects in its cavity ride along
check_success applies the task rule to the simulated outcome.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from internal.models.errors import InvalidTrajectoryError
from internal.models.types import Thresholds
from internal.scenegen.scene import (
    DRAWER_CAVITY_HALF, DRAWER_FLOOR_Z, DRAWER_TRAVEL, OBJECT_REST_Z, SceneSpec,
)

logger = logging.getLogger(__name__)

ATTACH_RADIUS = 0.04
HANDLE_CONTACT_RADIUS = 0.02
GRIP_THRESHOLD = 0.5
_Z_TOLERANCE = 1e-6


@dataclass
class KinematicState:
    """Final object/drawer state plus per-step target diagnostics."""
    initial_positions: np.ndarray          # (n_objects, 3)
    positions: np.ndarray                  # (n_objects, 3) at the end
    drawer_center: Optional[np.ndarray]    # (x, y) of the drawer box at the end
    drawer_open: bool
    target_distances: np.ndarray           # (T,) end-effector to target centroid
    target_heights: np.ndarray             # (T,) target z after each step
    grasped: list = field(default_factory=list)  # indices of objects attached at some step


@dataclass
class SuccessResult:
    success: bool
    final_distance_m: float        # minimum end-effector to target distance
    displacement_m: np.ndarray     # target final - initial position (x, y, z)
    max_height_gain_m: float

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "final_distance_m": self.final_distance_m,
            "displacement_m": [float(v) for v in self.displacement_m],
            "max_height_gain_m": self.max_height_gain_m,
        }


def _as_steps(traj) -> np.ndarray:
    steps = np.asarray(traj, dtype=np.float64)
    if steps.ndim != 2 or steps.shape[1] != 4 or steps.shape[0] < 1:
        raise InvalidTrajectoryError(f"trajectory must be (T, 4), got {steps.shape}")
    if not np.all(np.isfinite(steps)):
        raise InvalidTrajectoryError("trajectory contains NaN or Inf")
    return steps


def _in_cavity(point, center) -> bool:
    return (
        abs(point[0] - center[0]) <= DRAWER_CAVITY_HALF[0]
        and abs(point[1] - center[1]) <= DRAWER_CAVITY_HALF[1]
    )


def simulate_kinematics(scene: SceneSpec, traj) -> KinematicState:
    steps = _as_steps(traj)
    positions = np.array([[*o.position, OBJECT_REST_Z] for o in scene.objects], dtype=np.float64)
    initial = positions.copy()
    drawer_center = None if scene.drawer is None else np.array(scene.drawer.position, dtype=np.float64)
    drawer_open = scene.drawer is not None and scene.drawer.open
    if scene.drawer is not None and not scene.drawer.open:
        drawer_center[0] += DRAWER_TRAVEL

    attached = None
    offset = None
    grasped = []
    closed_prev = False
    contact_x = None
    distances = np.empty(len(steps))
    heights = np.empty(len(steps))

    for t, (x, y, z, g) in enumerate(steps):
        ee = np.array([x, y, z])
        closed = g > GRIP_THRESHOLD

        if closed and not closed_prev and attached is None:
            gaps = np.linalg.norm(positions - ee, axis=1)
            nearest = int(np.argmin(gaps))
            if gaps[nearest] <= ATTACH_RADIUS:
                attached = nearest
                offset = positions[nearest] - ee
                if nearest not in grasped:
                    grasped.append(nearest)
        elif closed_prev and not closed and attached is not None:
            drop = positions[attached]
            if drawer_open and _in_cavity(drop, drawer_center):
                drop[2] = DRAWER_FLOOR_Z
            else:
                drop[2] = OBJECT_REST_Z
            attached = None
            offset = None

        if attached is not None:
            positions[attached] = ee + offset

        if drawer_open and attached is None:
            handle = np.array(scene.drawer.handle)
            if contact_x is None and np.linalg.norm(ee - handle) <= HANDLE_CONTACT_RADIUS:
                contact_x = x
            if contact_x is not None and x - contact_x >= DRAWER_TRAVEL - 1e-9:
                for i, pos in enumerate(positions):
                    if _in_cavity(pos, drawer_center) and pos[2] <= DRAWER_FLOOR_Z + _Z_TOLERANCE:
                        positions[i, 0] += DRAWER_TRAVEL
                drawer_center = drawer_center + np.array([DRAWER_TRAVEL, 0.0])
                drawer_open = False

        target = positions[scene.target_index]
        distances[t] = float(np.linalg.norm(ee - target))
        heights[t] = target[2]
        closed_prev = closed

    return KinematicState(
        initial_positions=initial,
        positions=positions,
        drawer_center=drawer_center,
        drawer_open=drawer_open,
        target_distances=distances,
        target_heights=heights,
        grasped=grasped,
    )


def check_success(scene: SceneSpec, traj, thresholds: Thresholds = Thresholds()) -> SuccessResult:
    """Simulate the trajectory and apply the scene task's success rule.

    reach       closest approach to the target centroid < reach_m
    lift        target rises >= lift_m above its start at some step
    move_*      target lifted at some step and finally displaced >= move_m
                along the commanded y direction (left = -y)
    insert      target ends inside the drawer cavity, resting on its floor
    close       insert succeeded and the drawer ended closed
    """
    state = simulate_kinematics(scene, traj)
    t = scene.target_index
    displacement = state.positions[t] - state.initial_positions[t]
    gain = float(np.max(state.target_heights) - state.initial_positions[t, 2])
    final_distance = float(np.min(state.target_distances))

    task = scene.task
    if task == "reach":
        success = final_distance < thresholds.reach_m
    elif task == "lift":
        success = gain >= thresholds.lift_m
    elif task in ("move_left", "move_right"):
        lateral = -displacement[1] if task == "move_left" else displacement[1]
        success = gain >= 0.01 and lateral >= thresholds.move_m
    else:
        final = state.positions[t]
        inserted = (
            state.drawer_center is not None
            and _in_cavity(final, state.drawer_center)
            and abs(final[2] - DRAWER_FLOOR_Z) <= _Z_TOLERANCE
        )
        success = inserted if task == "reach_lift_insert" else inserted and not state.drawer_open

    return SuccessResult(
        success=bool(success),
        final_distance_m=final_distance,
        displacement_m=displacement,
        max_height_gain_m=gain,
    )
