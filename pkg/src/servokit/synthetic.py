"""Ray-cast synthetic RGB-D renderer (spheres and axis-aligned boxes).

Lets the whole perception pipeline run with no camera attached: scenes are
defined in base-frame coordinates, rasterized through the pinhole model
with a z-buffer, and come back as ordinary RgbdFrame objects. Background
pixels get depth 0 (invalid).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .perception import CameraModel, CameraMount, RgbdFrame


@dataclass
class SceneObject:
    shape: str  # "sphere" | "box"
    center: np.ndarray
    color_rgb: tuple[int, int, int]
    radius: float = 0.0
    half_extents: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if self.shape == "sphere":
            if self.radius <= 0.0:
                raise ValidationError("sphere needs radius > 0")
        elif self.shape == "box":
            if self.half_extents is None:
                raise ValidationError("box needs half_extents")
            self.half_extents = np.asarray(self.half_extents, dtype=float)
            if np.any(self.half_extents <= 0.0):
                raise ValidationError("box half_extents must be > 0")
        else:
            raise ValidationError(f"unknown shape {self.shape!r}")


@dataclass
class Scene:
    objects: list[SceneObject]
    background_rgb: tuple[int, int, int] = (16, 16, 16)


def load_scene(path: str | Path) -> Scene:
    path = Path(path)
    if not path.exists():
        raise ParseError(f"file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    objects = []
    for obj in doc.get("objects", []):
        objects.append(
            SceneObject(
                shape=obj["shape"],
                center=np.array(obj["center"], dtype=float),
                color_rgb=tuple(int(v) for v in obj["color_rgb"]),
                radius=float(obj.get("radius", 0.0)),
                half_extents=(
                    np.array(obj["half_extents"], dtype=float) if "half_extents" in obj else None
                ),
                label=obj.get("label", ""),
            )
        )
    background = tuple(int(v) for v in doc.get("background_rgb", (16, 16, 16)))
    return Scene(objects=objects, background_rgb=background)


def render(scene: Scene, camera: CameraModel, mount: CameraMount) -> RgbdFrame:
    """Rasterize the scene as seen through the mounted camera.

    Rays are cast per pixel with direction ((u-cx)/fx, (v-cy)/fy, 1) in the
    optical frame, so the ray parameter at a hit is exactly the optical-z
    depth stored in the buffer.
    """
    intr = camera.intrinsics
    h, w = camera.height, camera.width
    us, vs = np.meshgrid(np.arange(w), np.arange(h))
    dirs_opt = np.stack(
        [(us - intr.cx) / intr.fx, (vs - intr.cy) / intr.fy, np.ones((h, w))], axis=-1
    )

    base_from_opt = mount.base_from_optical()
    origin = base_from_opt.translation
    dirs = dirs_opt @ base_from_opt.rotation.T  # (H, W, 3) ray directions in base frame

    depth = np.full((h, w), np.inf)
    rgb = np.empty((h, w, 3), dtype=np.uint8)
    rgb[...] = np.array(scene.background_rgb, dtype=np.uint8)

    for obj in scene.objects:
        if obj.shape == "sphere":
            hit = _intersect_sphere(origin, dirs, obj.center, obj.radius)
        else:
            hit = _intersect_aabb(origin, dirs, obj.center, obj.half_extents)
        closer = hit < depth
        depth = np.where(closer, hit, depth)
        rgb[closer] = np.array(obj.color_rgb, dtype=np.uint8)

    depth = np.where(np.isinf(depth), 0.0, depth)
    return RgbdFrame(width=w, height=h, rgb=rgb, depth=depth, intrinsics=intr)


def _intersect_sphere(origin: np.ndarray, dirs: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    oc = origin - center
    a = np.sum(dirs * dirs, axis=-1)
    b = 2.0 * (dirs @ oc)
    c = float(oc @ oc) - radius * radius
    disc = b * b - 4.0 * a * c
    ok = disc >= 0.0
    sqrt_disc = np.sqrt(np.where(ok, disc, 0.0))
    s = (-b - sqrt_disc) / (2.0 * a)
    return np.where(ok & (s > 0.0), s, np.inf)


def _intersect_aabb(origin: np.ndarray, dirs: np.ndarray, center: np.ndarray, half: np.ndarray) -> np.ndarray:
    lo = center - half
    hi = center + half
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t_lo = (lo - origin) * inv
        t_hi = (hi - origin) * inv
    t_near = np.nanmax(np.minimum(t_lo, t_hi), axis=-1)
    t_far = np.nanmin(np.maximum(t_lo, t_hi), axis=-1)
    # Rays parallel to a slab axis: inside the slab iff origin between faces.
    for axis in range(3):
        parallel = dirs[..., axis] == 0.0
        if np.any(parallel):
            outside = parallel & ((origin[axis] < lo[axis]) | (origin[axis] > hi[axis]))
            t_far = np.where(outside, -np.inf, t_far)
    ok = (t_near <= t_far) & (t_near > 0.0)
    return np.where(ok, t_near, np.inf)
