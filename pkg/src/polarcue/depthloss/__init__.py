"""Geometry, losses and gradients for polarimetric self-supervised depth."""
from .geometry import (
    CameraIntrinsics,
    DegenerateGeometry,
    Pose,
    angular_error,
    backproject,
    backproject_map,
    efield_map,
    efield_real,
    normal_map,
    project,
    project_angle,
    project_angle_map,
    relative_pose,
    rotation_about,
    surface_normal,
    view_ray,
    view_rays,
)
from .gradient import LossGradient, dense_gradient, loss_gradient
from .losses import (
    TERMS,
    VARIANTS,
    LossBreakdown,
    LossProblem,
    LossWeights,
    polar_loss,
    polar_maps,
    reprojection_loss,
    smoothness_loss,
    total_loss,
)
from .photometric import photometric_error, reprojection_maps, ssim, warp
