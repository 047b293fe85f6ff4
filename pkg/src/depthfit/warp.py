"""View synthesis: reconstruct the reference image from an auxiliary frame.

For reference pixel x with depth z, the point K^-1 [x;1] z is moved into the
auxiliary camera by the relative pose, projected, and sampled bilinearly.
The warp also reports the analytic derivative of the warped coordinates with
respect to depth, which the objective needs for its chain rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import CameraModel, ColorImage, DepthMap, RigidPose, ScalarGrid, as_mask, sample_channels

# Transformed points with depth below this are behind (or on) the camera
# plane and cannot be projected; they are flagged invalid per pixel.
MIN_TRANSFORMED_DEPTH = 1e-6


@dataclass(frozen=True)
class WarpResult:
    """Reconstruction of the reference view plus projection byproducts.

    ``warped_u``/``warped_v`` are the projected coordinates in the auxiliary
    image; ``du_dz``/``dv_dz`` their derivatives w.r.t. the reference depth.
    ``in_bounds`` is false where the sample cell leaves the auxiliary image
    or the transformed point falls behind the camera.
    """

    reconstructed: ColorImage
    in_bounds: np.ndarray
    warped_u: ScalarGrid
    warped_v: ScalarGrid
    du_dz: ScalarGrid
    dv_dz: ScalarGrid

    def __post_init__(self):
        shape = self.reconstructed.shape
        object.__setattr__(self, "in_bounds", as_mask(self.in_bounds, shape))
        for field in (self.warped_u, self.warped_v, self.du_dz, self.dv_dz):
            if field.shape != shape:
                raise ValueError("warp fields must share the image dimensions")


def pixel_rays(cam: CameraModel, height: int, width: int) -> np.ndarray:
    """(H, W, 3) array of K^-1 [u, v, 1] for every pixel center."""
    u = np.arange(width, dtype=np.float64)
    v = np.arange(height, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    rays = np.empty((height, width, 3))
    rays[..., 0] = (uu - cam.cx) / cam.fx
    rays[..., 1] = (vv - cam.cy) / cam.fy
    rays[..., 2] = 1.0
    return rays


def reconstruct(
    target_aux: ColorImage, depth: DepthMap, cam: CameraModel, pose: RigidPose
) -> WarpResult:
    """Rebuild the reference view by sampling ``target_aux`` through the geometry.

    ``pose`` maps reference-camera coordinates into the auxiliary camera.
    Pixels whose transformed depth is non-positive are flagged out of bounds
    (and sampled clamp-to-edge) rather than raising; the residual pipeline
    treats them like any other invisible pixel.
    """
    h, w = depth.shape
    rays = pixel_rays(cam, h, w)
    z = depth.values

    # X(z) = (R r) z + t per pixel; projection and its depth derivative
    # follow from the quotient rule.
    q = rays @ pose.rotation.T
    t = pose.translation
    px = q[..., 0] * z + t[0]
    py = q[..., 1] * z + t[1]
    pz = q[..., 2] * z + t[2]

    front = pz > MIN_TRANSFORMED_DEPTH
    pz_safe = np.where(front, pz, 1.0)

    warped_u = cam.fx * px / pz_safe + cam.cx
    warped_v = cam.fy * py / pz_safe + cam.cy

    inv_pz2 = 1.0 / (pz_safe * pz_safe)
    du_dz = cam.fx * (q[..., 0] * t[2] - q[..., 2] * t[0]) * inv_pz2
    dv_dz = cam.fy * (q[..., 1] * t[2] - q[..., 2] * t[1]) * inv_pz2

    # Behind-camera pixels get a harmless clamped sample and zero derivative.
    warped_u = np.where(front, warped_u, -1.0)
    warped_v = np.where(front, warped_v, -1.0)
    du_dz = np.where(front, du_dz, 0.0)
    dv_dz = np.where(front, dv_dz, 0.0)

    rgb, sample_ok = sample_channels(target_aux.stacked(), warped_u, warped_v)
    in_bounds = sample_ok & front

    return WarpResult(
        reconstructed=ColorImage.from_array(np.clip(rgb, 0.0, 1.0)),
        in_bounds=in_bounds,
        warped_u=ScalarGrid(warped_u),
        warped_v=ScalarGrid(warped_v),
        du_dz=ScalarGrid(du_dz),
        dv_dz=ScalarGrid(dv_dz),
    )
