"""Procedural phantom description and its on-disk config format (YAML)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml


class GeometryError(ValueError):
    """Phantom geometry that cannot be built (primitive outside the body, bad sizes)."""


@dataclass
class EllipsoidPrimitive:
    center: tuple[float, float, float]
    semi_axes: tuple[float, float, float]
    intensity: float
    attenuation: float  # per mm
    reverb: bool = False

    kind = "ellipsoid"

    def contains(self, x, y, z):
        cx, cy, cz = self.center
        rx, ry, rz = self.semi_axes
        return ((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2 + ((z - cz) / rz) ** 2 <= 1.0

    def bounds(self):
        c = np.asarray(self.center)
        r = np.asarray(self.semi_axes)
        return c - r, c + r

    def to_dict(self) -> dict:
        return {
            "kind": "ellipsoid",
            "center_mm": list(self.center),
            "semi_axes_mm": list(self.semi_axes),
            "intensity": self.intensity,
            "attenuation_per_mm": self.attenuation,
            "reverb": self.reverb,
        }


@dataclass
class TubePrimitive:
    """Finite cylinder along an arbitrary axis."""

    center: tuple[float, float, float]
    axis: tuple[float, float, float]
    radius: float
    half_length: float
    intensity: float
    attenuation: float
    reverb: bool = False

    kind = "tube"

    def _unit_axis(self) -> np.ndarray:
        a = np.asarray(self.axis, dtype=np.float64)
        return a / np.sqrt(a @ a)

    def contains(self, x, y, z):
        a = self._unit_axis()
        dx, dy, dz = x - self.center[0], y - self.center[1], z - self.center[2]
        t = dx * a[0] + dy * a[1] + dz * a[2]
        perp2 = (dx - t * a[0]) ** 2 + (dy - t * a[1]) ** 2 + (dz - t * a[2]) ** 2
        return (np.abs(t) <= self.half_length) & (perp2 <= self.radius**2)

    def bounds(self):
        c = np.asarray(self.center)
        reach = self.half_length * np.abs(self._unit_axis()) + self.radius
        return c - reach, c + reach

    def to_dict(self) -> dict:
        return {
            "kind": "tube",
            "center_mm": list(self.center),
            "axis": list(self.axis),
            "radius_mm": self.radius,
            "half_length_mm": self.half_length,
            "intensity": self.intensity,
            "attenuation_per_mm": self.attenuation,
            "reverb": self.reverb,
        }


@dataclass
class PhantomSpec:
    """Half-ellipsoid body with interior primitives and baked speckle."""

    surface_semi_axes: tuple[float, float, float] = (100.0, 100.0, 120.0)
    background_intensity: float = 0.35
    background_attenuation: float = 0.004
    speckle_scale_mm: float = 2.5
    speckle_amplitude: float = 0.3
    seed: int = 0
    primitives: list = field(default_factory=list)

    def validate(self):
        if any(s <= 0 for s in self.surface_semi_axes):
            raise GeometryError(f"surface semi-axes must be positive: {self.surface_semi_axes}")
        if not (0.0 <= self.background_intensity <= 1.0):
            raise GeometryError("background intensity must be in [0,1]")
        if self.background_attenuation < 0 or self.speckle_amplitude < 0 or self.speckle_scale_mm <= 0:
            raise GeometryError("attenuation and speckle parameters must be non-negative")
        a, b, c = self.surface_semi_axes
        for i, p in enumerate(self.primitives):
            if not (0.0 <= p.intensity <= 1.0):
                raise GeometryError(f"primitive {i}: intensity {p.intensity} outside [0,1]")
            if p.attenuation < 0:
                raise GeometryError(f"primitive {i}: negative attenuation")
            lo, hi = p.bounds()
            if lo[2] < 0:
                raise GeometryError(f"primitive {i}: extends below the bed plane (z={lo[2]:.1f})")
            # conservative box check against the implicit surface
            for corner_x in (lo[0], hi[0]):
                for corner_y in (lo[1], hi[1]):
                    for corner_z in (lo[2], hi[2]):
                        if (corner_x / a) ** 2 + (corner_y / b) ** 2 + (corner_z / c) ** 2 > 1.0:
                            raise GeometryError(
                                f"primitive {i}: corner ({corner_x:.1f},{corner_y:.1f},{corner_z:.1f}) "
                                "outside the phantom surface")
        return self

    def to_dict(self) -> dict:
        return {
            "surface_semi_axes_mm": list(self.surface_semi_axes),
            "background_intensity": self.background_intensity,
            "background_attenuation_per_mm": self.background_attenuation,
            "speckle_scale_mm": self.speckle_scale_mm,
            "speckle_amplitude": self.speckle_amplitude,
            "seed": self.seed,
            "primitives": [p.to_dict() for p in self.primitives],
        }


def _primitive_from_dict(d: dict):
    kind = d.get("kind", "ellipsoid")
    common = dict(
        intensity=float(d["intensity"]),
        attenuation=float(d.get("attenuation_per_mm", 0.0)),
        reverb=bool(d.get("reverb", False)),
    )
    if kind == "ellipsoid":
        return EllipsoidPrimitive(
            center=tuple(float(v) for v in d["center_mm"]),
            semi_axes=tuple(float(v) for v in d["semi_axes_mm"]),
            **common,
        )
    if kind == "tube":
        return TubePrimitive(
            center=tuple(float(v) for v in d["center_mm"]),
            axis=tuple(float(v) for v in d.get("axis", (0.0, 1.0, 0.0))),
            radius=float(d["radius_mm"]),
            half_length=float(d["half_length_mm"]),
            **common,
        )
    raise GeometryError(f"unknown primitive kind {kind!r}")


def phantom_spec_from_dict(d: dict) -> PhantomSpec:
    spec = PhantomSpec(
        surface_semi_axes=tuple(float(v) for v in d.get("surface_semi_axes_mm", (100.0, 100.0, 120.0))),
        background_intensity=float(d.get("background_intensity", 0.35)),
        background_attenuation=float(d.get("background_attenuation_per_mm", 0.004)),
        speckle_scale_mm=float(d.get("speckle_scale_mm", 2.5)),
        speckle_amplitude=float(d.get("speckle_amplitude", 0.3)),
        seed=int(d.get("seed", 0)),
        primitives=[_primitive_from_dict(p) for p in d.get("primitives", [])],
    )
    return spec.validate()


def load_phantom_spec(path) -> PhantomSpec:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise GeometryError(f"{path}: phantom config must be a mapping")
    return phantom_spec_from_dict(data)


def save_phantom_spec(spec: PhantomSpec, path):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(spec.to_dict(), fh, sort_keys=False)


def default_phantom(seed: int = 42) -> PhantomSpec:
    """Stock desk phantom: a few organs, a duct, one strong shadower."""
    spec = PhantomSpec(
        seed=seed,
        primitives=[
            EllipsoidPrimitive(center=(30.0, -12.0, 58.0), semi_axes=(26.0, 20.0, 18.0),
                               intensity=0.8, attenuation=0.010, reverb=True),
            EllipsoidPrimitive(center=(-32.0, 20.0, 52.0), semi_axes=(20.0, 24.0, 16.0),
                               intensity=0.12, attenuation=0.002),
            EllipsoidPrimitive(center=(0.0, 38.0, 70.0), semi_axes=(14.0, 14.0, 12.0),
                               intensity=0.95, attenuation=0.035),
            EllipsoidPrimitive(center=(-8.0, -36.0, 66.0), semi_axes=(16.0, 12.0, 12.0),
                               intensity=0.6, attenuation=0.008),
            TubePrimitive(center=(8.0, 4.0, 34.0), axis=(0.3, 1.0, 0.05), radius=7.0,
                          half_length=52.0, intensity=0.05, attenuation=0.001),
            EllipsoidPrimitive(center=(18.0, 26.0, 40.0), semi_axes=(10.0, 8.0, 9.0),
                               intensity=0.5, attenuation=0.006),
        ],
    )
    return spec.validate()
