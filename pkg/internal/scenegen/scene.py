"""Tabletop scene specification and sampling.

Table frame: x points away from the robot, y along the table edge, z up,
meters. The workspace is the square |x|, |y| <= 0.25 centered under the
top-view camera; the robot base sits just off its near edge at x = -0.30.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from internal.models.errors import GenerationError
from internal.scenegen.cells import CellConfig, DRAWER_TASKS, TASKS

logger = logging.getLogger(__name__)

OBJECT_KINDS = ("apple", "lemon", "soap")
VARIABILITY_LEVELS = ("fixed", "var1", "var2", "var3")

WORKSPACE_HALF = 0.25
NOMINAL_OBJECT = (0.0, 0.10)
NOMINAL_DRAWER = (0.0, -0.12)
POSITION_JITTER = 0.05
DISTRACTOR_SPREAD = 0.10
MIN_SEPARATION = 0.08
ROBOT_BASE_X = -0.30
ROBOT_BASE_Y_RANGE = 0.20
MAX_PLACEMENT_ATTEMPTS = 1000

OBJECT_REST_Z = 0.02

DRAWER_SIZE = (0.10, 0.12)             # box extent (x, y)
DRAWER_CAVITY_HALF = (0.035, 0.045)    # open cavity half-extents (x, y)
DRAWER_TRAVEL = 0.06                   # closing stroke along +x
DRAWER_HANDLE_OFFSET = 0.055           # handle sits on the robot-facing side
DRAWER_HANDLE_Z = 0.04
DRAWER_FLOOR_Z = 0.01


@dataclass(frozen=True)
class SceneObject:
    kind: str
    position: tuple  # (x, y) on the table plane


@dataclass(frozen=True)
class DrawerSpec:
    position: tuple  # box center (x, y) while open
    open: bool = True

    @property
    def handle(self) -> tuple:
        return (self.position[0] - DRAWER_HANDLE_OFFSET, self.position[1], DRAWER_HANDLE_Z)


@dataclass(frozen=True)
class SceneSpec:
    """One sampled scene: objects, addressed target, robot base offset, drawer, task."""
    objects: tuple
    target_index: int
    robot_base_y: float
    task: str
    variability_level: str
    drawer: Optional[DrawerSpec] = None

    @property
    def target(self) -> SceneObject:
        return self.objects[self.target_index]

    @property
    def home(self) -> tuple:
        return (ROBOT_BASE_X + 0.10, self.robot_base_y, 0.15)

    def validate(self) -> list:
        errors = []
        if not self.objects:
            errors.append("scene needs at least one object")
        if not 0 <= self.target_index < len(self.objects):
            errors.append(f"target_index {self.target_index} out of range")
        if self.task not in TASKS:
            errors.append(f"unknown task '{self.task}'")
        if self.variability_level not in VARIABILITY_LEVELS:
            errors.append(f"unknown variability level '{self.variability_level}'")
        if (self.drawer is not None) != (self.task in DRAWER_TASKS):
            errors.append("a drawer is present iff the task needs one")
        for obj in self.objects:
            if obj.kind not in OBJECT_KINDS:
                errors.append(f"unknown object kind '{obj.kind}'")
            if any(abs(c) > WORKSPACE_HALF + 1e-12 for c in obj.position):
                errors.append(f"{obj.kind} at {obj.position} outside the workspace")
        for i in range(len(self.objects)):
            for j in range(i + 1, len(self.objects)):
                if _distance(self.objects[i].position, self.objects[j].position) < MIN_SEPARATION:
                    errors.append(f"objects {i} and {j} closer than {MIN_SEPARATION} m")
        return errors

    def to_dict(self) -> dict:
        return {
            "objects": [{"kind": o.kind, "position": list(o.position)} for o in self.objects],
            "target_index": self.target_index,
            "robot_base_y": self.robot_base_y,
            "task": self.task,
            "variability_level": self.variability_level,
            "drawer": None if self.drawer is None else {
                "position": list(self.drawer.position), "open": self.drawer.open,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        drawer = data.get("drawer")
        return cls(
            objects=tuple(SceneObject(o["kind"], tuple(o["position"])) for o in data["objects"]),
            target_index=data["target_index"],
            robot_base_y=data["robot_base_y"],
            task=data["task"],
            variability_level=data["variability_level"],
            drawer=None if drawer is None else DrawerSpec(tuple(drawer["position"]), drawer["open"]),
        )


def _distance(a, b) -> float:
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))


def _jitter(nominal: tuple, level: str, rng: np.random.Generator) -> tuple:
    x, y = nominal
    if level in ("var1", "var2", "var3"):
        x += float(rng.uniform(-POSITION_JITTER, POSITION_JITTER))
    if level in ("var2", "var3"):
        y += float(rng.uniform(-POSITION_JITTER, POSITION_JITTER))
    return (x, y)


def _spread_positions(count: int, rng: np.random.Generator) -> list:
    """Rejection-sample `count` positions around the nominal spot, pairwise separated."""
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        positions = [
            (
                NOMINAL_OBJECT[0] + float(rng.uniform(-DISTRACTOR_SPREAD, DISTRACTOR_SPREAD)),
                NOMINAL_OBJECT[1] + float(rng.uniform(-DISTRACTOR_SPREAD, DISTRACTOR_SPREAD)),
            )
            for _ in range(count)
        ]
        if all(
            _distance(positions[i], positions[j]) >= MIN_SEPARATION
            for i in range(count) for j in range(i + 1, count)
        ):
            return positions
    raise GenerationError(
        f"could not place {count} objects {MIN_SEPARATION} m apart in {MAX_PLACEMENT_ATTEMPTS} attempts"
    )


def sample_scene(cell: CellConfig, rng: np.random.Generator, task: Optional[str] = None) -> SceneSpec:
    """Sample a scene for the cell; `task` forces one of the cell's tasks."""
    if task is None:
        task = cell.tasks[int(rng.integers(len(cell.tasks)))]
    elif task not in cell.tasks:
        raise GenerationError(f"task '{task}' is not part of cell {cell.name}")
    level = cell.variability_level

    kinds = [OBJECT_KINDS[i] for i in rng.permutation(len(OBJECT_KINDS))]
    kinds = kinds[:1 + cell.n_distractors]  # kinds[0] is the target
    if cell.n_distractors:
        positions = _spread_positions(len(kinds), rng)
    else:
        positions = [_jitter(NOMINAL_OBJECT, level, rng)]

    order = [int(i) for i in rng.permutation(len(kinds))]
    objects = tuple(SceneObject(kinds[i], positions[i]) for i in order)
    target_index = order.index(0)

    robot_base_y = 0.0
    if level == "var3":
        robot_base_y = float(rng.uniform(-ROBOT_BASE_Y_RANGE, ROBOT_BASE_Y_RANGE))

    drawer = None
    if task in DRAWER_TASKS:
        drawer = DrawerSpec(_jitter(NOMINAL_DRAWER, level, rng), open=True)

    return SceneSpec(
        objects=objects,
        target_index=target_index,
        robot_base_y=robot_base_y,
        task=task,
        variability_level=level,
        drawer=drawer,
    )
