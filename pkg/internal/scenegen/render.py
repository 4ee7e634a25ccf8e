"""Top-view orthographic rasterizer.

The image covers the workspace square; row 0 is the far edge (+x), column 0
is -y. Each pixel takes the color of the last shape covering its center
(nearest-pixel, no anti-aliasing). Draw order: table, drawer, robot base,
objects.
"""

import numpy as np

from internal.scenegen.scene import (
    DRAWER_CAVITY_HALF, DRAWER_SIZE, DRAWER_TRAVEL, ROBOT_BASE_X, SceneSpec, WORKSPACE_HALF,
)

BACKGROUND = (0.85, 0.85, 0.85)
COLORS = {
    "apple": (0.85, 0.10, 0.10),
    "lemon": (0.95, 0.85, 0.10),
    "soap": (0.15, 0.35, 0.90),
    "robot_base": (0.45, 0.45, 0.45),
    "drawer": (0.55, 0.35, 0.15),
    "drawer_cavity": (0.30, 0.18, 0.07),
}

APPLE_RADIUS = 0.030
# full extents (x, y) in meters
LEMON_SIZE = (0.022, 0.035)
SOAP_SIZE = (0.030, 0.050)
ROBOT_BASE_HALF = (0.07, 0.07)


def pixel_centers(size: int) -> tuple:
    """(x, y) coordinate grids of pixel centers, each (size, size)."""
    pitch = 2.0 * WORKSPACE_HALF / size
    offsets = (np.arange(size) + 0.5) * pitch
    xs = WORKSPACE_HALF - offsets
    ys = -WORKSPACE_HALF + offsets
    return np.meshgrid(xs, ys, indexing="ij")


def _box(x, y, cx, cy, hx, hy):
    return (np.abs(x - cx) <= hx) & (np.abs(y - cy) <= hy)


def _paint(image, mask, color):
    image[mask] = color


def render_topview(scene: SceneSpec, size: int = 64) -> np.ndarray:
    """(size, size, 3) float32 image in [0, 1]."""
    x, y = pixel_centers(size)
    image = np.empty((size, size, 3), dtype=np.float32)
    image[...] = BACKGROUND

    if scene.drawer is not None:
        cx, cy = scene.drawer.position
        if not scene.drawer.open:
            cx += DRAWER_TRAVEL
        _paint(image, _box(x, y, cx, cy, DRAWER_SIZE[0] / 2, DRAWER_SIZE[1] / 2), COLORS["drawer"])
        if scene.drawer.open:
            _paint(image, _box(x, y, cx, cy, *DRAWER_CAVITY_HALF), COLORS["drawer_cavity"])

    _paint(image, _box(x, y, ROBOT_BASE_X, scene.robot_base_y, *ROBOT_BASE_HALF), COLORS["robot_base"])

    for obj in scene.objects:
        ox, oy = obj.position
        if obj.kind == "apple":
            mask = (x - ox) ** 2 + (y - oy) ** 2 <= APPLE_RADIUS ** 2
        elif obj.kind == "lemon":
            ax, ay = LEMON_SIZE[0] / 2, LEMON_SIZE[1] / 2
            mask = ((x - ox) / ax) ** 2 + ((y - oy) / ay) ** 2 <= 1.0
        else:
            mask = _box(x, y, ox, oy, SOAP_SIZE[0] / 2, SOAP_SIZE[1] / 2)
        _paint(image, mask, COLORS[obj.kind])
    return image


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
