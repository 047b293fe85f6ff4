"""Directory serialization for generated scenes.

A scene directory holds the three PPM images, the float PFM ground-truth
depth, PFM-encoded occlusion and sparse-depth maps, and a flat
``manifest.txt`` of key = value lines recording geometry and provenance.
"""

from __future__ import annotations

import os

import numpy as np

from . import imageio
from .grid import CameraModel, ColorImage, DepthMap, RigidPose, ScalarGrid, SparseDepthMap
from .scenegen import SceneInstance

MANIFEST_NAME = "manifest.txt"

FILES = {
    "image_prev": "image_prev.ppm",
    "image_ref": "image_ref.ppm",
    "image_next": "image_next.ppm",
    "true_depth": "true_depth.pfm",
    "occluded_prev": "occluded_prev.pfm",
    "occluded_next": "occluded_next.pfm",
    "sparse_depth": "sparse_depth.pfm",
}


def _pose_line(pose: RigidPose) -> str:
    vals = list(pose.rotation.reshape(-1)) + list(pose.translation)
    return " ".join(repr(float(v)) for v in vals)


def _parse_pose(text: str) -> RigidPose:
    vals = [float(tok) for tok in text.split()]
    if len(vals) != 12:
        raise ValueError("pose lines need 12 values (row-major rotation + translation)")
    return RigidPose(np.array(vals[:9]).reshape(3, 3), np.array(vals[9:]))


def save_scene(scene: SceneInstance, out_dir) -> str:
    """Write the scene to ``out_dir``; returns the manifest path."""
    imageio.ensure_dir(out_dir)
    imageio.write_ppm(os.path.join(out_dir, FILES["image_prev"]), scene.image_prev)
    imageio.write_ppm(os.path.join(out_dir, FILES["image_ref"]), scene.image_ref)
    imageio.write_ppm(os.path.join(out_dir, FILES["image_next"]), scene.image_next)
    imageio.write_pfm(os.path.join(out_dir, FILES["true_depth"]), scene.true_depth.values)
    imageio.write_mask_pfm(os.path.join(out_dir, FILES["occluded_prev"]), scene.occluded_prev)
    imageio.write_mask_pfm(os.path.join(out_dir, FILES["occluded_next"]), scene.occluded_next)
    sparse_vals = np.where(scene.sparse.valid, scene.sparse.depth.values, 0.0)
    imageio.write_pfm(os.path.join(out_dir, FILES["sparse_depth"]), sparse_vals)

    cam = scene.cam
    lines = [
        f"width = {scene.image_ref.width}",
        f"height = {scene.image_ref.height}",
        f"fx = {cam.fx!r}",
        f"fy = {cam.fy!r}",
        f"cx = {cam.cx!r}",
        f"cy = {cam.cy!r}",
        f"z_min = {scene.true_depth.z_min!r}",
        f"z_max = {scene.true_depth.z_max!r}",
        f"pose_prev = {_pose_line(scene.pose_prev)}",
        f"pose_next = {_pose_line(scene.pose_next)}",
    ]
    if scene.spec is not None:
        lines += [
            f"layout = {scene.spec.layout}",
            f"texture = {scene.spec.texture}",
            f"baseline = {scene.spec.baseline!r}",
            f"motion = {scene.spec.motion}",
            f"seed = {scene.spec.seed}",
        ]
    manifest = os.path.join(out_dir, MANIFEST_NAME)
    with open(manifest, "w", encoding="ascii") as f:
        f.write("\n".join(lines) + "\n")
    return manifest


def _require(path: str) -> str:
    if not os.path.exists(path):
        raise FileNotFoundError(f"scene file missing: {path}")
    return path


def load_scene(scene_dir) -> SceneInstance:
    """Read a scene directory written by :func:`save_scene`.

    Images round-trip through 8-bit files, so intensities are quantized to
    1/255; depth and masks are exact (float32).
    """
    manifest = _require(os.path.join(scene_dir, MANIFEST_NAME))
    kv: dict[str, str] = {}
    with open(manifest, "r", encoding="ascii") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            kv[key.strip()] = value.strip()

    z_min = float(kv["z_min"])
    z_max = float(kv["z_max"])
    cam = CameraModel(float(kv["fx"]), float(kv["fy"]), float(kv["cx"]), float(kv["cy"]))

    def path(key: str) -> str:
        return _require(os.path.join(scene_dir, FILES[key]))

    depth_vals = np.asarray(imageio.read_pfm(path("true_depth")), dtype=np.float64)
    sparse_vals = np.asarray(imageio.read_pfm(path("sparse_depth")), dtype=np.float64)
    valid = sparse_vals > 0.0
    sparse = SparseDepthMap(ScalarGrid(np.where(valid, sparse_vals, 1.0)), valid)

    return SceneInstance(
        image_prev=imageio.read_ppm(path("image_prev")),
        image_ref=imageio.read_ppm(path("image_ref")),
        image_next=imageio.read_ppm(path("image_next")),
        true_depth=DepthMap(ScalarGrid(depth_vals), z_min, z_max),
        pose_prev=_parse_pose(kv["pose_prev"]),
        pose_next=_parse_pose(kv["pose_next"]),
        cam=cam,
        occluded_prev=imageio.read_mask_pfm(path("occluded_prev")),
        occluded_next=imageio.read_mask_pfm(path("occluded_next")),
        sparse=sparse,
        spec=None,
    )
