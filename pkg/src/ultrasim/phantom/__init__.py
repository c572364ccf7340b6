from .pose import Pose, PoseError, surface_pose, quat_normalize, quat_multiply, quat_to_matrix
from .spec import PhantomSpec, EllipsoidPrimitive, TubePrimitive, GeometryError, load_phantom_spec, save_phantom_spec
from .volume import Volume, build_phantom, sample_trilinear
from .render import ImagingParams, render_slice, sector_mask, BlankFrameWarning
from .dataset import Frame, SurfaceSampler, generate_dataset, carve_hole

__all__ = [
    "Pose",
    "PoseError",
    "surface_pose",
    "quat_normalize",
    "quat_multiply",
    "quat_to_matrix",
    "PhantomSpec",
    "EllipsoidPrimitive",
    "TubePrimitive",
    "GeometryError",
    "load_phantom_spec",
    "save_phantom_spec",
    "Volume",
    "build_phantom",
    "sample_trilinear",
    "ImagingParams",
    "render_slice",
    "sector_mask",
    "BlankFrameWarning",
    "Frame",
    "SurfaceSampler",
    "generate_dataset",
    "carve_hole",
]
