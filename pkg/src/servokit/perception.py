"""RGB-D color-centroid pipeline: HSV thresholding, 8-connected components,
median-depth pinhole deprojection, and camera-to-base transformation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import NoDepthError, TargetNotFoundError, UnknownLabelError, ValidationError
from .kinematics import fk
from .model import KinematicChain, validate_mount_rotation
from .transforms import Transform

_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0.0 or self.fy <= 0.0:
            raise ValidationError("focal lengths must be > 0")


@dataclass
class CameraModel:
    width: int
    height: int
    intrinsics: Intrinsics


@dataclass
class RgbdFrame:
    """RGB + depth pair with pinhole intrinsics. Depth is meters, 0 = invalid."""

    width: int
    height: int
    rgb: np.ndarray  # (H, W, 3) uint8
    depth: np.ndarray  # (H, W) float, meters
    intrinsics: Intrinsics

    def __post_init__(self):
        self.rgb = np.asarray(self.rgb, dtype=np.uint8)
        self.depth = np.asarray(self.depth, dtype=float)
        if self.rgb.shape != (self.height, self.width, 3):
            raise ValidationError(
                f"rgb shape {self.rgb.shape} does not match {self.height}x{self.width}x3"
            )
        if self.depth.shape != (self.height, self.width):
            raise ValidationError(
                f"depth shape {self.depth.shape} does not match {self.height}x{self.width}"
            )
        if np.any(self.depth < 0.0):
            raise ValidationError("depth must be >= 0")


@dataclass(frozen=True)
class HsvRange:
    """Hue in degrees [0, 360), possibly wrapping (h_lo > h_hi spans 0)."""

    label: str
    h_lo: float
    h_hi: float
    s_lo: float
    s_hi: float
    v_lo: float
    v_hi: float
    min_area: int = 1

    def __post_init__(self):
        if not (0.0 <= self.s_lo <= self.s_hi <= 1.0):
            raise ValidationError(f"label {self.label!r}: s range must be ordered within [0, 1]")
        if not (0.0 <= self.v_lo <= self.v_hi <= 1.0):
            raise ValidationError(f"label {self.label!r}: v range must be ordered within [0, 1]")
        if self.min_area < 1:
            raise ValidationError(f"label {self.label!r}: min_area must be >= 1")


@dataclass
class Component:
    """One connected blob: member pixel indices plus summary stats."""

    area: int
    bbox: tuple[int, int, int, int]  # (u_min, v_min, u_max, v_max), inclusive
    first_pixel: int  # row-major linear index, fixes the deterministic order
    rows: np.ndarray
    cols: np.ndarray


@dataclass
class Detection:
    label: str
    pixel_centroid: tuple[float, float]  # (u, v), subpixel
    area: int
    point_camera: np.ndarray
    point_base: np.ndarray

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "pixel_centroid": [self.pixel_centroid[0], self.pixel_centroid[1]],
            "area": self.area,
            "point_camera": [float(v) for v in self.point_camera],
            "point_base": [float(v) for v in self.point_base],
        }


@dataclass
class CameraMount:
    """Head pose: a 2-DoF neck chain carrying the camera body, the fixed
    rotation from optical axes (x-right, y-down, z-forward) to body axes,
    and a hand-tuned base-frame offset."""

    neck_chain: KinematicChain
    head_pan: float = 0.0
    head_tilt: float = 0.0
    optical_alignment: np.ndarray = field(
        default_factory=lambda: np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
    )
    calibration_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.optical_alignment = validate_mount_rotation(self.optical_alignment, "optical_alignment")
        self.calibration_offset = np.asarray(self.calibration_offset, dtype=float)
        if len(self.neck_chain) != 2:
            raise ValidationError("neck chain must have exactly 2 joints (pan, tilt)")

    def base_from_optical(self) -> Transform:
        """Transform taking optical-frame points to base-frame points."""
        body = fk(self.neck_chain, np.array([self.head_pan, self.head_tilt]))
        return Transform(
            rotation=body.rotation @ self.optical_alignment,
            translation=body.translation + self.calibration_offset,
        )


def rgb_to_hsv(pixel) -> tuple[float, float, float]:
    """Hexcone conversion of one 8-bit RGB triplet to (h deg, s, v).

    Gray pixels (max == min) take h = 0 by convention; black also has s = 0.
    """
    arr = rgb_to_hsv_image(np.asarray(pixel, dtype=np.uint8).reshape(1, 1, 3))
    h, s, v = arr[0, 0]
    return float(h), float(s), float(v)


def rgb_to_hsv_image(rgb: np.ndarray) -> np.ndarray:
    """Vectorized hexcone conversion; returns (H, W, 3) of (h deg, s, v)."""
    rgbf = rgb.astype(float) / 255.0
    r, g, b = rgbf[..., 0], rgbf[..., 1], rgbf[..., 2]
    maxc = rgbf.max(axis=-1)
    minc = rgbf.min(axis=-1)
    delta = maxc - minc
    h = np.zeros_like(maxc)
    mask = delta > 0
    rc = np.where(mask & (maxc == r), ((g - b) / np.where(delta == 0, 1, delta)) % 6.0, 0.0)
    gc = np.where(mask & (maxc == g) & (maxc != r), (b - r) / np.where(delta == 0, 1, delta) + 2.0, 0.0)
    bc = np.where(
        mask & (maxc == b) & (maxc != r) & (maxc != g),
        (r - g) / np.where(delta == 0, 1, delta) + 4.0,
        0.0,
    )
    h = (rc + gc + bc) * 60.0
    h = np.where(mask, h % 360.0, 0.0)
    s = np.where(maxc > 0, delta / np.where(maxc == 0, 1, maxc), 0.0)
    return np.stack([h, s, maxc], axis=-1)


def hsv_mask(frame: RgbdFrame, hsv_range: HsvRange) -> np.ndarray:
    hsv = rgb_to_hsv_image(frame.rgb)
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    h_lo, h_hi = hsv_range.h_lo % 360.0, hsv_range.h_hi % 360.0
    if h_lo <= h_hi:
        h_ok = (h >= h_lo) & (h <= h_hi)
    else:  # wraps through 0
        h_ok = (h >= h_lo) | (h <= h_hi)
    return (
        h_ok
        & (s >= hsv_range.s_lo)
        & (s <= hsv_range.s_hi)
        & (v >= hsv_range.v_lo)
        & (v <= hsv_range.v_hi)
    )


def segment(frame: RgbdFrame, hsv_range: HsvRange) -> tuple[np.ndarray, list[Component]]:
    """Threshold then 8-connected labeling. Components below min_area are
    dropped; the rest are ordered by their first pixel in scanline order,
    which makes the output independent of traversal strategy."""
    mask = hsv_mask(frame, hsv_range)
    labels, count = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    components = []
    if count == 0:
        return mask, components
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    slices = ndimage.find_objects(labels)
    for label_id in range(1, count + 1):
        area = int(areas[label_id])
        if area < hsv_range.min_area:
            continue
        window = slices[label_id - 1]
        local_rows, local_cols = np.nonzero(labels[window] == label_id)
        rows = local_rows + window[0].start
        cols = local_cols + window[1].start
        first = int(rows[0] * frame.width + cols[0])
        components.append(
            Component(
                area=area,
                bbox=(int(cols.min()), int(rows.min()), int(cols.max()), int(rows.max())),
                first_pixel=first,
                rows=rows,
                cols=cols,
            )
        )
    components.sort(key=lambda c: c.first_pixel)
    return mask, components


def centroid_3d(frame: RgbdFrame, component: Component) -> np.ndarray:
    """Mean-pixel centroid deprojected at the median valid depth."""
    u = float(component.cols.mean())
    v = float(component.rows.mean())
    depths = frame.depth[component.rows, component.cols]
    valid = depths[depths > 0.0]
    if valid.size == 0:
        raise NoDepthError(f"no depth support: component at ({u:.1f}, {v:.1f}) has no valid depth")
    z = float(np.median(valid))
    intr = frame.intrinsics
    return np.array([(u - intr.cx) / intr.fx * z, (v - intr.cy) / intr.fy * z, z])


def project(intrinsics: Intrinsics, point: np.ndarray) -> tuple[float, float]:
    """Pinhole projection of an optical-frame point to pixel coordinates."""
    x, y, z = (float(v) for v in point)
    if z <= 0.0:
        raise ValidationError("cannot project a point with z <= 0")
    return intrinsics.fx * x / z + intrinsics.cx, intrinsics.fy * y / z + intrinsics.cy


def camera_to_base(mount: CameraMount, point_camera: np.ndarray) -> np.ndarray:
    return mount.base_from_optical().apply(point_camera)


def detect_and_locate(
    frame: RgbdFrame,
    ranges: dict[str, HsvRange],
    mount: CameraMount,
    label: str,
) -> Detection:
    """Largest qualifying component of the label, located in base frame."""
    if label not in ranges:
        raise UnknownLabelError(f"label {label!r} not in configured ranges {sorted(ranges)}")
    _, components = segment(frame, ranges[label])
    if not components:
        raise TargetNotFoundError(f"target not found: no {label!r} component above min_area")
    best = max(components, key=lambda c: (c.area, -c.first_pixel))
    point_camera = centroid_3d(frame, best)
    point_base = camera_to_base(mount, point_camera)
    u = float(best.cols.mean())
    v = float(best.rows.mean())
    return Detection(
        label=label,
        pixel_centroid=(u, v),
        area=best.area,
        point_camera=point_camera,
        point_base=point_base,
    )


def load_frame_png(
    rgb_path, depth_path, intrinsics: Intrinsics, depth_scale: float = 0.001
) -> RgbdFrame:
    """Load an RGB PNG and a 16-bit depth PNG (millimeters by default)."""
    from PIL import Image

    rgb = np.asarray(Image.open(rgb_path).convert("RGB"))
    depth_img = Image.open(depth_path)
    depth = np.asarray(depth_img, dtype=float) * depth_scale
    if depth.ndim != 2:
        raise ValidationError("depth PNG must be single-channel")
    h, w = rgb.shape[:2]
    return RgbdFrame(width=w, height=h, rgb=rgb, depth=depth, intrinsics=intrinsics)
