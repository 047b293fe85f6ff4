"""Dense 2-D grids, images, sparse depth, and camera geometry primitives.

All field types wrap float64 numpy arrays in row-major layout and are frozen
after construction, so they can be shared freely between pipeline stages.
Pixel (x, y) lives at ``values[y, x]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _frozen_array(values, dtype=np.float64, ndim=2) -> np.ndarray:
    arr = np.array(values, dtype=dtype, order="C", copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-D array, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


def as_mask(mask, shape: tuple[int, int]) -> np.ndarray:
    """Coerce ``mask`` to a read-only boolean array of the given (H, W) shape."""
    arr = np.array(mask, dtype=bool, copy=True)
    if arr.shape != tuple(shape):
        raise ValueError(f"mask shape {arr.shape} does not match grid shape {tuple(shape)}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ScalarGrid:
    """Dense scalar field over the pixel domain. Values must be finite."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("grid must have positive width and height")
        if not np.all(np.isfinite(arr)):
            raise ValueError("grid contains non-finite values")
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @classmethod
    def full(cls, height: int, width: int, value: float) -> "ScalarGrid":
        return cls(np.full((height, width), value, dtype=np.float64))


@dataclass(frozen=True)
class ColorImage:
    """Three-channel intensity image with every value in [0, 1]."""

    r: ScalarGrid
    g: ScalarGrid
    b: ScalarGrid

    def __post_init__(self):
        if not (self.r.shape == self.g.shape == self.b.shape):
            raise ValueError("color channels must share dimensions")
        for ch in (self.r, self.g, self.b):
            v = ch.values
            if v.min() < 0.0 or v.max() > 1.0:
                raise ValueError("intensity values must lie in [0, 1]")

    @property
    def height(self) -> int:
        return self.r.height

    @property
    def width(self) -> int:
        return self.r.width

    @property
    def shape(self) -> tuple[int, int]:
        return self.r.shape

    @property
    def channels(self) -> tuple[ScalarGrid, ScalarGrid, ScalarGrid]:
        return (self.r, self.g, self.b)

    def stacked(self) -> np.ndarray:
        """(H, W, 3) view-copy of the three channels."""
        return np.stack([self.r.values, self.g.values, self.b.values], axis=-1)

    @classmethod
    def from_array(cls, rgb: np.ndarray) -> "ColorImage":
        rgb = np.asarray(rgb, dtype=np.float64)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ValueError(f"expected an (H, W, 3) array, got shape {rgb.shape}")
        return cls(ScalarGrid(rgb[..., 0]), ScalarGrid(rgb[..., 1]), ScalarGrid(rgb[..., 2]))

    @classmethod
    def from_gray(cls, gray) -> "ColorImage":
        g = ScalarGrid(gray)
        return cls(g, g, g)


@dataclass(frozen=True)
class SparseDepthMap:
    """Depth samples on a pixel subdomain, given by an explicit validity mask."""

    depth: ScalarGrid
    valid: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "valid", as_mask(self.valid, self.depth.shape))
        if not self.valid.any():
            raise ValueError("sparse depth map must contain at least one valid pixel")
        if np.any(self.depth.values[self.valid] <= 0.0):
            raise ValueError("valid sparse depths must be strictly positive")

    @property
    def count(self) -> int:
        return int(self.valid.sum())


DEFAULT_Z_MIN = 0.1
DEFAULT_Z_MAX = 100.0


@dataclass(frozen=True)
class DepthMap:
    """Dense strictly-positive depth field, constrained to [z_min, z_max]."""

    grid: ScalarGrid
    z_min: float = DEFAULT_Z_MIN
    z_max: float = DEFAULT_Z_MAX

    def __post_init__(self):
        if not (0.0 < self.z_min <= self.z_max):
            raise ValueError("require 0 < z_min <= z_max")
        v = self.grid.values
        if v.min() < self.z_min or v.max() > self.z_max:
            raise ValueError(
                f"depth values [{v.min():g}, {v.max():g}] fall outside "
                f"[{self.z_min:g}, {self.z_max:g}]"
            )

    @property
    def values(self) -> np.ndarray:
        return self.grid.values

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics, in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0.0 or self.fy <= 0.0:
            raise ValueError("focal lengths must be positive")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


_ROTATION_TOL = 1e-9


@dataclass(frozen=True)
class RigidPose:
    """Rigid transform x_out = R @ x_in + t, with R a proper rotation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = _frozen_array(self.rotation, ndim=2)
        if rot.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        trans = _frozen_array(self.translation, ndim=1)
        if trans.shape != (3,):
            raise ValueError("translation must be a 3-vector")
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > _ROTATION_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > _ROTATION_TOL:
            raise ValueError("rotation must have determinant +1")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @classmethod
    def identity(cls) -> "RigidPose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_translation(cls, tx: float, ty: float, tz: float) -> "RigidPose":
        return cls(np.eye(3), np.array([tx, ty, tz], dtype=np.float64))

    def inverse(self) -> "RigidPose":
        rot_inv = self.rotation.T
        return RigidPose(rot_inv, -rot_inv @ self.translation)

    def compose(self, other: "RigidPose") -> "RigidPose":
        """self ∘ other: apply ``other`` first, then ``self``."""
        return RigidPose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform points of shape (..., 3)."""
        return points @ self.rotation.T + self.translation


# ---------------------------------------------------------------------------
# Sampling and differential operators
# ---------------------------------------------------------------------------


def _sample_prep(width: int, height: int, u, v):
    """Shared index/weight computation for bilinear sampling.

    Coordinates are clamped to the image rectangle; the base index of the
    2x2 cell is clamped so the cell always lies inside the image.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    in_bounds = (u >= 0.0) & (u <= width - 1.0) & (v >= 0.0) & (v <= height - 1.0)
    uc = np.clip(u, 0.0, width - 1.0)
    vc = np.clip(v, 0.0, height - 1.0)
    x0 = np.clip(np.floor(uc).astype(np.int64), 0, max(width - 2, 0))
    y0 = np.clip(np.floor(vc).astype(np.int64), 0, max(height - 2, 0))
    fu = uc - x0
    fv = vc - y0
    return x0, y0, fu, fv, in_bounds


def sample_channels(channels: np.ndarray, u, v):
    """Bilinearly sample an (H, W, C) array at real-valued pixel coordinates.

    Returns (samples, in_bounds) where samples has shape ``u.shape + (C,)``.
    Out-of-rectangle coordinates are clamped to the edge and flagged.
    """
    h, w = channels.shape[:2]
    x0, y0, fu, fv, in_bounds = _sample_prep(w, h, u, v)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    c00 = channels[y0, x0]
    c10 = channels[y0, x1]
    c01 = channels[y1, x0]
    c11 = channels[y1, x1]
    wu = fu[..., None]
    wv = fv[..., None]
    top = c00 * (1.0 - wu) + c10 * wu
    bot = c01 * (1.0 - wu) + c11 * wu
    return top * (1.0 - wv) + bot * wv, in_bounds


def sample_channel_gradient(channels: np.ndarray, u, v):
    """Derivatives of the bilinear sample w.r.t. the sample coordinates.

    Returns (d_du, d_dv), each of shape ``u.shape + (C,)``. Within a 2x2
    cell the sampled value is bilinear, so the derivative is exact there.
    """
    h, w = channels.shape[:2]
    x0, y0, fu, fv, _ = _sample_prep(w, h, u, v)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    c00 = channels[y0, x0]
    c10 = channels[y0, x1]
    c01 = channels[y1, x0]
    c11 = channels[y1, x1]
    wu = fu[..., None]
    wv = fv[..., None]
    d_du = (c10 - c00) * (1.0 - wv) + (c11 - c01) * wv
    d_dv = (c01 - c00) * (1.0 - wu) + (c11 - c10) * wu
    return d_du, d_dv


def bilinear_sample(img: ColorImage, u: float, v: float):
    """Sample an image at one real-valued pixel coordinate.

    Returns (rgb, in_bounds): the interpolated 3-vector and whether the
    sample cell lies fully inside the image. Out-of-bounds coordinates
    fall back to a clamp-to-edge sample, so this is a total function.
    """
    rgb, ok = sample_channels(img.stacked(), np.float64(u), np.float64(v))
    return rgb, bool(ok)


def forward_gradient(g: ScalarGrid) -> tuple[ScalarGrid, ScalarGrid]:
    """One-sided forward differences; zero on the last column / last row."""
    v = g.values
    gx = np.zeros_like(v)
    gy = np.zeros_like(v)
    gx[:, :-1] = v[:, 1:] - v[:, :-1]
    gy[:-1, :] = v[1:, :] - v[:-1, :]
    return ScalarGrid(gx), ScalarGrid(gy)


def masked_mean(g: ScalarGrid, mask: np.ndarray) -> float:
    """Arithmetic mean of the grid over the given boolean mask."""
    mask = as_mask(mask, g.shape)
    n = int(mask.sum())
    if n == 0:
        raise ValueError("mask selects no pixels; mean over an empty domain is undefined")
    return float(g.values[mask].sum() / n)
