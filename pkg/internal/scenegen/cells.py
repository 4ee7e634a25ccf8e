"""Dataset-cell registry: the scene-complexity x task-set grid and the
variability x task-length grid.

Each cell defines:
  - placement        fixed | random | var1 | var2 | var3 (position jitter rule)
  - n_distractors    extra objects of other kinds (0-2)
  - tasks            tasks sampled uniformly per trial
  - image/trajectory/text sizes written to the dataset

The two Variability-2 cells for reach and reach+lift coincide with the
"1 random" reach / lift cells and are registered as aliases, so the grid has
34 distinct cells.
"""

import logging
from dataclasses import dataclass, asdict, fields

import yaml

from internal.models.errors import ConfigError

logger = logging.getLogger(__name__)

TASKS = ("reach", "lift", "move_left", "move_right", "reach_lift_insert", "reach_lift_insert_close")
VALID_PLACEMENTS = ("fixed", "random", "var1", "var2", "var3")
DRAWER_TASKS = ("reach_lift_insert", "reach_lift_insert_close")


@dataclass(frozen=True)
class CellConfig:
    """Immutable dataset-cell specification."""
    name: str
    placement: str
    n_distractors: int
    tasks: tuple
    image_size: int = 64
    t_max: int = 80
    l_max: int = 8
    description: str = ""

    @property
    def variability_level(self) -> str:
        """SceneSpec variability level; "random" placement jitters like var2."""
        return "var2" if self.placement == "random" else self.placement

    def validate(self) -> list:
        errors = []
        if not self.name:
            errors.append("name is required")
        if self.placement not in VALID_PLACEMENTS:
            errors.append(f"placement must be one of {VALID_PLACEMENTS}, got '{self.placement}'")
        if not 0 <= self.n_distractors <= 2:
            errors.append("n_distractors must be 0, 1 or 2")
        if self.n_distractors and self.placement == "fixed":
            errors.append("distractors require a random placement")
        if not self.tasks:
            errors.append("tasks must not be empty")
        for task in self.tasks:
            if task not in TASKS:
                errors.append(f"unknown task '{task}' (valid: {TASKS})")
        if self.image_size < 8 or self.image_size % 8 != 0:
            errors.append("image_size must be a positive multiple of 8")
        if self.t_max < 1 or self.l_max < 1:
            errors.append("t_max and l_max must be >= 1")
        return errors

    def to_dict(self) -> dict:
        data = asdict(self)
        data["tasks"] = list(self.tasks)
        return data


# ── Cell Registry ────────────────────────────────────────────────────────────

_COMPLEXITY_ROWS = {
    "fixed": ("fixed", 0, "1 object in a fixed position"),
    "random": ("random", 0, "1 object in a random position"),
    "distractor1": ("random", 1, "1 random object + 1 distractor"),
    "distractor2": ("random", 2, "1 random object + 2 distractors"),
}
_TASK_COLUMNS = {
    "reach": ("reach",),
    "move_left": ("move_left",),
    "move_right": ("move_right",),
    "lift": ("lift",),
    "actions2": ("move_right", "lift"),
    "actions3": ("move_right", "lift", "move_left"),
}
_VARIABILITY_ROWS = {
    "var1": "object and drawer vary along x",
    "var2": "object and drawer vary along x and y",
    "var3": "var2 plus robot base along y",
}
_LENGTH_COLUMNS = ("reach", "lift", "reach_lift_insert", "reach_lift_insert_close")

CELL_ALIASES = {"var2/reach": "random/reach", "var2/lift": "random/lift"}


def _build_registry() -> dict:
    cells = {}
    for row, (placement, n_distractors, label) in _COMPLEXITY_ROWS.items():
        for column, tasks in _TASK_COLUMNS.items():
            name = f"{row}/{column}"
            cells[name] = CellConfig(
                name=name, placement=placement, n_distractors=n_distractors,
                tasks=tasks, description=f"{label}; tasks: {', '.join(tasks)}",
            )
    for row, label in _VARIABILITY_ROWS.items():
        for column in _LENGTH_COLUMNS:
            name = f"{row}/{column}"
            if name in CELL_ALIASES:
                continue
            cells[name] = CellConfig(
                name=name, placement=row, n_distractors=0,
                tasks=(column,), description=f"{label}; task: {column}",
            )
    return cells


CELLS: dict = _build_registry()


def get_cell(name: str):
    """Return the CellConfig for the given name (aliases resolved), or None."""
    return CELLS.get(CELL_ALIASES.get(name, name))


def list_cells() -> list:
    """Return all distinct cells."""
    return list(CELLS.values())


def cell_from_dict(data: dict) -> CellConfig:
    """Build a CellConfig from a preset mapping.

    A preset either names a registered cell ({"cell": "random/reach"}) or
    spells out every field. Unknown keys and invalid values raise ConfigError.
    """
    if not isinstance(data, dict):
        raise ConfigError("cell config must be a mapping")
    if set(data) == {"cell"}:
        cell = get_cell(data["cell"])
        if cell is None:
            raise ConfigError(f"unknown cell '{data['cell']}'")
        return cell
    known = {f.name for f in fields(CellConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown cell config keys: {unknown}")
    values = dict(data)
    if isinstance(values.get("tasks"), (list, tuple)):
        values["tasks"] = tuple(values["tasks"])
    elif isinstance(values.get("tasks"), str):
        values["tasks"] = (values["tasks"],)
    try:
        cell = CellConfig(**values)
    except TypeError as e:
        raise ConfigError(f"incomplete cell config: {e}")
    errors = cell.validate()
    if errors:
        raise ConfigError("; ".join(errors))
    return cell


def load_cell(path: str) -> CellConfig:
    """Read a JSON/YAML preset file."""
    with open(path) as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse cell config {path}: {e}")
    cell = cell_from_dict(data)
    logger.debug("Loaded cell %s from %s", cell.name, path)
    return cell
