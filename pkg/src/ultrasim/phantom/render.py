"""Fan-masked 2D slice rendering with beam attenuation shadowing.

The image is a pure function of (volume, pose, imaging parameters): rows run
along the beam (depth), columns are lateral. Attenuation accumulates down
each pixel column, so everything distal to an absorber darkens, which makes
the output view-dependent the way the learning task needs.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .pose import Pose
from .volume import Volume, sample_trilinear


class BlankFrameWarning(UserWarning):
    """Slice plane missed the volume entirely; a zero frame was returned."""


@dataclass(frozen=True)
class ImagingParams:
    image_size: int = 256
    pixel_spacing_mm: float = 0.5
    sector_half_angle_deg: float = 35.0
    near_field_mm: float = 12.0
    shadow_strength: float = 1.0
    reverb_strength: float = 0.35

    def __post_init__(self):
        if self.image_size < 2:
            raise ValueError("image_size must be at least 2")
        if not (0.0 < self.sector_half_angle_deg < 90.0):
            raise ValueError("sector half-angle must lie in (0, 90) degrees")
        if self.pixel_spacing_mm <= 0:
            raise ValueError("pixel spacing must be positive")

    @classmethod
    def for_size(cls, n: int, **kw) -> "ImagingParams":
        """Same 128 mm field of view at any resolution."""
        kw.setdefault("pixel_spacing_mm", 0.5 * 256.0 / n)
        return cls(image_size=n, **kw)


def sector_mask(params: ImagingParams) -> np.ndarray:
    """Fan-shaped validity mask in image coordinates (same for every pose)."""
    s = params.image_size
    sp = params.pixel_spacing_mm
    rows = np.arange(s)[:, None] * sp + params.near_field_mm
    cols = (np.arange(s)[None, :] - (s - 1) / 2.0) * sp
    angle = np.arctan2(np.abs(cols), rows)
    radius = np.hypot(cols, rows)
    max_radius = params.near_field_mm + s * sp
    return (angle <= math.radians(params.sector_half_angle_deg)) & (radius <= max_radius)


def _plane_points(pose: Pose, params: ImagingParams) -> np.ndarray:
    s = params.image_size
    sp = params.pixel_spacing_mm
    rot = pose.rotation()
    lateral, beam = rot[:, 0], rot[:, 2]
    center = np.asarray(pose.position, dtype=np.float64)
    rr = np.arange(s, dtype=np.float64) * sp
    cc = (np.arange(s, dtype=np.float64) - (s - 1) / 2.0) * sp
    return (center[None, None, :]
            + rr[:, None, None] * beam[None, None, :]
            + cc[None, :, None] * lateral[None, None, :])


def render_slice(vol: Volume, pose: Pose, params: ImagingParams,
                 reverb_primitives=None) -> np.ndarray:
    """Render one frame; float32 in [0,1], zero outside the sector."""
    pts = _plane_points(pose, params)
    s = params.image_size
    flat = pts.reshape(-1, 3)

    lo = vol.origin
    hi = vol.origin + (np.array(vol.intensity.shape) - 1) * vol.spacing
    if np.all((flat < lo).any(axis=1) | (flat > hi).any(axis=1)):
        warnings.warn("slice plane lies outside the volume", BlankFrameWarning)
        return np.zeros((s, s), dtype=np.float32)

    echo = sample_trilinear(vol.intensity, vol.origin, vol.spacing, flat).reshape(s, s)
    att = sample_trilinear(vol.attenuation, vol.origin, vol.spacing, flat).reshape(s, s)

    # cumulative absorption above each pixel, exclusive of its own row
    path = np.zeros_like(att)
    np.cumsum(att[:-1], axis=0, out=path[1:])
    transmission = np.exp(-params.shadow_strength * params.pixel_spacing_mm * path)
    image = echo * transmission

    if reverb_primitives:
        image = _add_reverb(image, transmission, pts, params, reverb_primitives)

    image *= sector_mask(params)
    return np.clip(image, 0.0, 1.0).astype(np.float32)


def _add_reverb(image, transmission, pts, params: ImagingParams, primitives):
    """Ghost copy of each bright entry interface at twice its depth."""
    s = params.image_size
    x, y, z = pts[:, :, 0], pts[:, :, 1], pts[:, :, 2]
    for prim in primitives:
        hit = prim.contains(x, y, z)
        cols = hit.any(axis=0)
        if not cols.any():
            continue
        first = hit.argmax(axis=0)
        ghost_rows = 2 * first
        ok = cols & (ghost_rows < s)
        src_c = np.nonzero(ok)[0]
        src_r = first[src_c]
        image[ghost_rows[src_c], src_c] += (
            params.reverb_strength * image[src_r, src_c] * transmission[ghost_rows[src_c], src_c]
        )
    return image
