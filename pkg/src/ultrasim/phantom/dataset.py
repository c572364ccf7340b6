"""Frame generation: seeded pose sampling over the phantom surface."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..tensor.rng import Rng
from .pose import Pose, surface_pose
from .render import ImagingParams, render_slice
from .spec import PhantomSpec
from .volume import Volume, build_phantom


@dataclass
class Frame:
    image: np.ndarray  # (S, S) float32 in [0,1]
    pose: Pose
    index: int


@dataclass(frozen=True)
class SurfaceSampler:
    """Uniform ranges for (u, v, tilt, roll), all in degrees."""

    u_range: tuple[float, float] = (8.0, 65.0)
    v_range: tuple[float, float] = (-180.0, 180.0)
    tilt_range: tuple[float, float] = (-10.0, 10.0)
    roll_range: tuple[float, float] = (-10.0, 10.0)

    def draw(self, rng: Rng, n: int) -> np.ndarray:
        cols = [rng.uniform(size=n, lo=lo, hi=hi)
                for lo, hi in (self.u_range, self.v_range, self.tilt_range, self.roll_range)]
        return np.stack(cols, axis=1)


def generate_dataset(n: int, spec: PhantomSpec, params: ImagingParams, seed: int,
                     sampler: SurfaceSampler | None = None,
                     volume: Volume | None = None) -> list[Frame]:
    """n rendered frames with seeded poses. Same seed, same frames."""
    if n < 1:
        raise ValueError("need n >= 1 frames")
    sampler = sampler or SurfaceSampler()
    vol = volume if volume is not None else build_phantom(spec)
    reverb_prims = [p for p in spec.primitives if p.reverb]
    draws = sampler.draw(Rng(seed).spawn(7), n)
    frames = []
    for i in range(n):
        u, v, tilt, roll = draws[i]
        pose = surface_pose(u, v, tilt, roll, spec)
        image = render_slice(vol, pose, params, reverb_primitives=reverb_prims)
        frames.append(Frame(image=image, pose=pose, index=i))
    return frames


def carve_hole(frames: list[Frame], center, radius: float):
    """Split frames by probe distance to a sphere center.

    Returns (kept, removed, removed_fraction); kept and removed partition the
    input in order.
    """
    if radius <= 0:
        raise ValueError("hole radius must be positive")
    c = np.asarray(center, dtype=np.float64)
    kept, removed = [], []
    for f in frames:
        d = np.linalg.norm(np.asarray(f.pose.position) - c)
        (removed if d <= radius else kept).append(f)
    fraction = len(removed) / len(frames) if frames else 0.0
    return kept, removed, fraction
