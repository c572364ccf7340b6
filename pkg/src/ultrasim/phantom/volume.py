"""Voxelized phantom: intensity and attenuation grids at 0.5 mm spacing."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..tensor.rng import Rng
from .spec import PhantomSpec

VOXEL_MM = 0.5
_MARGIN_MM = 2.0
_SLAB = 24  # z-slices per build chunk, bounds temporary arrays


@dataclass
class Volume:
    """Immutable after construction; safe to share across threads."""

    intensity: np.ndarray  # (nx, ny, nz) float32 in [0,1]
    attenuation: np.ndarray  # (nx, ny, nz) float32, per mm
    origin: np.ndarray  # (3,) mm, center of voxel [0,0,0]

    spacing: float = VOXEL_MM

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.origin.astype("<f8").tobytes())
        h.update(self.intensity.astype("<f4", copy=False).tobytes())
        h.update(self.attenuation.astype("<f4", copy=False).tobytes())
        return h.hexdigest()


def sample_trilinear(grid: np.ndarray, origin, spacing: float, pts: np.ndarray) -> np.ndarray:
    """Trilinear interpolation at world points (N,3); zero outside the grid."""
    t = (np.asarray(pts, dtype=np.float64) - np.asarray(origin)) / spacing
    nx, ny, nz = grid.shape
    inside = (
        (t[:, 0] >= 0.0) & (t[:, 0] <= nx - 1)
        & (t[:, 1] >= 0.0) & (t[:, 1] <= ny - 1)
        & (t[:, 2] >= 0.0) & (t[:, 2] <= nz - 1)
    )
    tc = np.clip(t, 0.0, [nx - 1, ny - 1, nz - 1])
    i0 = np.minimum(tc.astype(np.int64), [nx - 2, ny - 2, nz - 2])
    f = tc - i0
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
    ix, iy, iz = i0[:, 0], i0[:, 1], i0[:, 2]

    def g(dx, dy, dz):
        return grid[ix + dx, iy + dy, iz + dz].astype(np.float64)

    val = (
        g(0, 0, 0) * (1 - fx) * (1 - fy) * (1 - fz)
        + g(1, 0, 0) * fx * (1 - fy) * (1 - fz)
        + g(0, 1, 0) * (1 - fx) * fy * (1 - fz)
        + g(0, 0, 1) * (1 - fx) * (1 - fy) * fz
        + g(1, 1, 0) * fx * fy * (1 - fz)
        + g(1, 0, 1) * fx * (1 - fy) * fz
        + g(0, 1, 1) * (1 - fx) * fy * fz
        + g(1, 1, 1) * fx * fy * fz
    )
    val[~inside] = 0.0
    return val


def _axis_coords(lo: float, hi: float) -> np.ndarray:
    n = int(np.floor((hi - lo) / VOXEL_MM)) + 1
    return lo + VOXEL_MM * np.arange(n)


def _speckle_field(spec: PhantomSpec, xs, ys, zs) -> np.ndarray:
    """Multiplicative texture on a coarse lattice, linearly upsampled per axis."""
    rng = Rng(spec.seed).spawn(101)
    scale = spec.speckle_scale_mm
    coarse_axes = []
    for coords in (xs, ys, zs):
        n = int(np.floor((coords[-1] - coords[0]) / scale)) + 2
        coarse_axes.append((coords[0], n))
    noise = rng.uniform(size=(coarse_axes[0][1], coarse_axes[1][1], coarse_axes[2][1]))
    field = (1.0 + spec.speckle_amplitude * (2.0 * noise - 1.0)).astype(np.float32)

    for axis, coords in enumerate((xs, ys, zs)):
        o = coarse_axes[axis][0]
        n = field.shape[axis]
        t = np.clip((coords - o) / scale, 0.0, n - 1 - 1e-9)
        i0 = t.astype(np.int64)
        f = (t - i0).astype(np.float32)
        lo = np.take(field, i0, axis=axis)
        hi = np.take(field, np.minimum(i0 + 1, n - 1), axis=axis)
        shape = [1, 1, 1]
        shape[axis] = len(coords)
        f = f.reshape(shape)
        field = lo * (1.0 - f) + hi * f
    return field


def build_phantom(spec: PhantomSpec, bake_speckle: bool = True) -> Volume:
    """Rasterize the spec onto the 0.5 mm grid. Deterministic for a fixed seed."""
    spec.validate()
    a, b, c = spec.surface_semi_axes
    xs = _axis_coords(-a - _MARGIN_MM, a + _MARGIN_MM)
    ys = _axis_coords(-b - _MARGIN_MM, b + _MARGIN_MM)
    zs = _axis_coords(-_MARGIN_MM, c + _MARGIN_MM)
    nx, ny, nz = len(xs), len(ys), len(zs)

    intensity = np.zeros((nx, ny, nz), dtype=np.float32)
    attenuation = np.zeros((nx, ny, nz), dtype=np.float32)

    x_col = (xs / a)[:, None, None] ** 2
    y_col = (ys / b)[None, :, None] ** 2
    xg = xs[:, None, None]
    yg = ys[None, :, None]
    for z0 in range(0, nz, _SLAB):
        z1 = min(z0 + _SLAB, nz)
        z_slab = zs[z0:z1]
        inside = (x_col + y_col + (z_slab / c)[None, None, :] ** 2 <= 1.0) & (z_slab >= 0.0)
        i_slab = np.where(inside, np.float32(spec.background_intensity), np.float32(0.0))
        a_slab = np.where(inside, np.float32(spec.background_attenuation), np.float32(0.0))
        zg = z_slab[None, None, :]
        for prim in spec.primitives:
            mask = prim.contains(xg, yg, zg) & inside
            i_slab[mask] = prim.intensity
            a_slab[mask] = prim.attenuation
        intensity[:, :, z0:z1] = i_slab
        attenuation[:, :, z0:z1] = a_slab

    if bake_speckle and spec.speckle_amplitude > 0.0:
        body = intensity > 0.0
        speckle = _speckle_field(spec, xs, ys, zs)
        intensity *= np.where(body, speckle, np.float32(1.0))
        np.clip(intensity, 0.0, 1.0, out=intensity)

    return Volume(intensity=intensity, attenuation=attenuation,
                  origin=np.array([xs[0], ys[0], zs[0]]))
