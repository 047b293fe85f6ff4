"""Synthetic scenes with exact ground truth.

Scenes are collections of textured fronto-parallel surfaces (an infinite
background plane plus rectangular cards) living in the reference camera
frame. Every view is rendered by analytic ray casting with a z-buffer, and
textures are procedural functions of the world hit point, so the three
views are photometrically consistent wherever they are co-visible.
Occlusion labels come from a geometric depth test, independent of any
photometric machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import (
    DEFAULT_Z_MAX,
    DEFAULT_Z_MIN,
    CameraModel,
    ColorImage,
    DepthMap,
    RigidPose,
    ScalarGrid,
    SparseDepthMap,
)
from .warp import pixel_rays

LAYOUTS = ("single-plane", "plane-plus-box", "staircase")
TEXTURES = ("multiscale-noise", "checker", "gradient-noise")
MOTIONS = ("lateral", "forward")
SPARSE_PATTERNS = ("uniform-random", "jittered-grid")

# Relative depth slack in the z-buffer comparison, avoiding self-occlusion
# false positives from floating-point at grazing samples.
OCCLUSION_DEPTH_TOL = 0.005

MIN_IN_BOUNDS_FRACTION = 0.70


@dataclass(frozen=True)
class SceneSpec:
    layout: str = "plane-plus-box"
    texture: str = "multiscale-noise"
    width: int = 128
    height: int = 96
    background_depth: float = 10.0
    box_depth: float = 5.0
    box_center: tuple[float, float] = (0.0, 0.0)
    box_size: tuple[float, float] = (2.0, 1.6)
    num_stairs: int = 4
    stair_near_depth: float = 4.0
    baseline: float = 0.55
    motion: str = "lateral"
    focal_px: float | None = None
    z_min: float = DEFAULT_Z_MIN
    z_max: float = DEFAULT_Z_MAX
    sparse_count: int | None = None
    sparse_pattern: str = "uniform-random"
    sparse_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ValueError(f"unknown layout {self.layout!r}; choose from {LAYOUTS}")
        if self.texture not in TEXTURES:
            raise ValueError(f"unknown texture {self.texture!r}; choose from {TEXTURES}")
        if self.motion not in MOTIONS:
            raise ValueError(f"unknown motion {self.motion!r}; choose from {MOTIONS}")
        if self.sparse_pattern not in SPARSE_PATTERNS:
            raise ValueError(
                f"unknown sparse pattern {self.sparse_pattern!r}; choose from {SPARSE_PATTERNS}"
            )
        if self.width < 8 or self.height < 8:
            raise ValueError("image must be at least 8x8")
        for d in (self.background_depth, self.box_depth, self.stair_near_depth):
            if not (self.z_min <= d <= self.z_max):
                raise ValueError(f"surface depth {d:g} outside [{self.z_min:g}, {self.z_max:g}]")
        if self.box_size[0] <= 0.0 or self.box_size[1] <= 0.0:
            raise ValueError("box size must be positive")
        if self.num_stairs < 2:
            raise ValueError("staircase needs at least two steps")
        if self.baseline < 0.0:
            raise ValueError("baseline must be non-negative")
        if self.sparse_noise < 0.0:
            raise ValueError("sparse noise sigma must be non-negative")

    @property
    def camera(self) -> CameraModel:
        f = self.focal_px if self.focal_px is not None else 0.9 * self.width
        return CameraModel(fx=f, fy=f, cx=(self.width - 1) / 2.0, cy=(self.height - 1) / 2.0)

    @property
    def default_sparse_count(self) -> int:
        if self.sparse_count is not None:
            return self.sparse_count
        return max(1, round(0.005 * self.width * self.height))


@dataclass(frozen=True)
class SceneInstance:
    image_prev: ColorImage
    image_ref: ColorImage
    image_next: ColorImage
    true_depth: DepthMap
    pose_prev: RigidPose
    pose_next: RigidPose
    cam: CameraModel
    occluded_prev: np.ndarray
    occluded_next: np.ndarray
    sparse: SparseDepthMap
    spec: SceneSpec | None = field(default=None, compare=False)

    @property
    def aux_images(self) -> tuple[ColorImage, ColorImage]:
        return (self.image_prev, self.image_next)

    @property
    def poses(self) -> tuple[RigidPose, RigidPose]:
        return (self.pose_prev, self.pose_next)

    @property
    def occlusion_labels(self) -> tuple[np.ndarray, np.ndarray]:
        return (self.occluded_prev, self.occluded_next)


# ---------------------------------------------------------------------------
# Procedural textures (functions of the world hit point)
# ---------------------------------------------------------------------------

_MIX1 = np.uint64(0x9E3779B97F4A7C15)
_MIX2 = np.uint64(0xC2B2AE3D27D4EB4F)
_MIX3 = np.uint64(0xBF58476D1CE4E5B9)
_MIX4 = np.uint64(0x94D049BB133111EB)


def _hash01(ix: np.ndarray, iy: np.ndarray, salt: int) -> np.ndarray:
    """Deterministic lattice hash -> [0, 1), vectorized on integer coords."""
    with np.errstate(over="ignore"):
        h = ix.astype(np.int64).astype(np.uint64) * _MIX1
        h ^= iy.astype(np.int64).astype(np.uint64) * _MIX2
        h ^= np.uint64(salt & 0xFFFFFFFFFFFFFFFF)
        h ^= h >> np.uint64(30)
        h *= _MIX3
        h ^= h >> np.uint64(27)
        h *= _MIX4
        h ^= h >> np.uint64(31)
    return h.astype(np.float64) / float(2**64)


def _value_noise(x: np.ndarray, y: np.ndarray, wavelength: float, salt: int) -> np.ndarray:
    """Smoothstep-interpolated lattice noise in [0, 1]; C1 in the coords."""
    gx = x / wavelength
    gy = y / wavelength
    ix = np.floor(gx)
    iy = np.floor(gy)
    fx = gx - ix
    fy = gy - iy
    sx = fx * fx * (3.0 - 2.0 * fx)
    sy = fy * fy * (3.0 - 2.0 * fy)
    v00 = _hash01(ix, iy, salt)
    v10 = _hash01(ix + 1, iy, salt)
    v01 = _hash01(ix, iy + 1, salt)
    v11 = _hash01(ix + 1, iy + 1, salt)
    top = v00 * (1.0 - sx) + v10 * sx
    bot = v01 * (1.0 - sx) + v11 * sx
    return top * (1.0 - sy) + bot * sy


_SURFACE_LEVELS = (0.42, 0.58, 0.50, 0.38, 0.62, 0.46, 0.54)


class _Texture:
    """Maps (surface id, world X, world Y) to RGB in [0, 1]."""

    def __init__(self, kind: str, seed: int, base_wavelength: float):
        self.kind = kind
        self.seed = seed
        self.base_wavelength = base_wavelength

    def sample(self, sid: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        level = np.asarray(_SURFACE_LEVELS)[sid % len(_SURFACE_LEVELS)]
        rgb = np.empty(x.shape + (3,))
        for c in range(3):
            salt = (self.seed * 1000003 + c * 7919) & 0xFFFFFFFFFFFFFFFF
            if self.kind == "multiscale-noise":
                t = self._multiscale(sid, x, y, salt)
            elif self.kind == "checker":
                t = self._checker(sid, x, y, c)
            else:
                t = self._gradient_noise(sid, x, y, salt)
            rgb[..., c] = np.clip(level + 0.6 * (t - 0.5), 0.0, 1.0)
        return rgb

    def _multiscale(self, sid, x, y, salt):
        lam = self.base_wavelength
        acc = np.zeros_like(x)
        total = 0.0
        for octave, amp in enumerate((1.0, 0.5, 0.3)):
            acc += amp * _value_noise(x, y, lam / (2.0**octave), salt + octave * 101 + sid * 13)
            total += amp
        return acc / total

    def _checker(self, sid, x, y, channel):
        lam = 2.0 * self.base_wavelength
        parity = (np.floor(x / lam) + np.floor(y / lam) + sid).astype(np.int64) % 2
        lo = 0.25 + 0.05 * channel
        hi = 0.75 - 0.05 * channel
        return np.where(parity == 0, lo, hi)

    def _gradient_noise(self, sid, x, y, salt):
        lam = 6.0 * self.base_wavelength
        ramp = 0.5 + 0.22 * np.sin(2.0 * np.pi * x / lam + sid) + 0.14 * np.cos(
            2.0 * np.pi * y / lam
        )
        fine = _value_noise(x, y, self.base_wavelength, salt + sid * 13)
        return np.clip(ramp + 0.14 * (fine - 0.5), 0.0, 1.0)


# ---------------------------------------------------------------------------
# Geometry: fronto-parallel surfaces and analytic ray casting
# ---------------------------------------------------------------------------

_INF = float("inf")


@dataclass(frozen=True)
class _Surface:
    """Axis-aligned plane z = z0, restricted to a rectangle in (X, Y)."""

    z0: float
    x_lo: float = -_INF
    x_hi: float = _INF
    y_lo: float = -_INF
    y_hi: float = _INF


def _build_surfaces(spec: SceneSpec) -> list[_Surface]:
    cam = spec.camera
    surfaces = [_Surface(z0=spec.background_depth)]
    if spec.layout == "plane-plus-box":
        cx_w, cy_w = spec.box_center
        hw = spec.box_size[0] / 2.0
        hh = spec.box_size[1] / 2.0
        surfaces.append(
            _Surface(spec.box_depth, cx_w - hw, cx_w + hw, cy_w - hh, cy_w + hh)
        )
    elif spec.layout == "staircase":
        # Vertical strips tiling the reference view, nearest at the left,
        # receding toward (but in front of) the background.
        far = 0.85 * spec.background_depth
        edges = np.linspace(0.0, spec.width - 1.0, spec.num_stairs + 1)
        for k in range(spec.num_stairs):
            zk = spec.stair_near_depth + (far - spec.stair_near_depth) * k / max(
                spec.num_stairs - 1, 1
            )
            x_lo = (edges[k] - cam.cx) / cam.fx * zk
            x_hi = (edges[k + 1] - cam.cx) / cam.fx * zk
            surfaces.append(_Surface(zk, x_lo, x_hi))
    return surfaces


def _trace(surfaces: list[_Surface], origin: np.ndarray, dx: np.ndarray, dy: np.ndarray):
    """Nearest surface hit along rays (dx, dy, 1) from ``origin``.

    Returns (depth, sid, hit_x, hit_y); depth is the camera-frame depth of
    the hit (rays have unit z). Every ray hits the background by design.
    """
    best_s = np.full(dx.shape, _INF)
    best_id = np.full(dx.shape, -1, dtype=np.int64)
    ox, oy, oz = origin
    for sid, surf in enumerate(surfaces):
        s = surf.z0 - oz
        if s <= 0.0:
            continue
        hx = ox + s * dx
        hy = oy + s * dy
        ok = (hx >= surf.x_lo) & (hx <= surf.x_hi) & (hy >= surf.y_lo) & (hy <= surf.y_hi)
        closer = ok & (s < best_s)
        best_s = np.where(closer, s, best_s)
        best_id = np.where(closer, sid, best_id)
    if np.any(best_id < 0):
        raise RuntimeError("ray escaped the scene; background plane missing")
    hit_x = ox + best_s * dx
    hit_y = oy + best_s * dy
    return best_s, best_id, hit_x, hit_y


def _render_view(surfaces, texture: _Texture, cam: CameraModel, origin, height, width):
    rays = pixel_rays(cam, height, width)
    depth, sid, hx, hy = _trace(surfaces, origin, rays[..., 0], rays[..., 1])
    rgb = texture.sample(sid, hx, hy)
    return rgb, depth


def _cast_depth(surfaces, cam: CameraModel, origin, u: np.ndarray, v: np.ndarray):
    dx = (u - cam.cx) / cam.fx
    dy = (v - cam.cy) / cam.fy
    depth, _, _, _ = _trace(surfaces, origin, dx, dy)
    return depth


def _occlusion_labels(
    surfaces, cam: CameraModel, true_depth: np.ndarray, center: np.ndarray
) -> np.ndarray:
    """Reference pixels without a co-visible correspondent in the view at
    ``center``: projected out of frame, behind the camera, or failing the
    z-buffer depth test against the geometry."""
    h, w = true_depth.shape
    rays = pixel_rays(cam, h, w)
    pts = rays * true_depth[..., None]
    z_view = pts[..., 2] - center[2]
    out = z_view <= 0.0
    z_safe = np.where(out, 1.0, z_view)
    u = cam.fx * (pts[..., 0] - center[0]) / z_safe + cam.cx
    v = cam.fy * (pts[..., 1] - center[1]) / z_safe + cam.cy
    out |= (u < 0.0) | (u > w - 1.0) | (v < 0.0) | (v > h - 1.0)
    visible_depth = _cast_depth(surfaces, cam, center, np.where(out, cam.cx, u), np.where(out, cam.cy, v))
    out |= z_view > visible_depth * (1.0 + OCCLUSION_DEPTH_TOL)
    return out


def _camera_centers(spec: SceneSpec) -> tuple[np.ndarray, np.ndarray]:
    if spec.motion == "lateral":
        axis = np.array([1.0, 0.0, 0.0])
    else:
        axis = np.array([0.0, 0.0, 1.0])
    return -spec.baseline * axis, spec.baseline * axis


def generate(spec: SceneSpec) -> SceneInstance:
    """Render the triplet, ground truth, occlusion labels, and sparse depth."""
    cam = spec.camera
    h, w = spec.height, spec.width
    surfaces = _build_surfaces(spec)
    # Base wavelength ~8 background-plane pixel footprints keeps textures
    # smooth enough for sub-0.02 resampling error yet textured everywhere.
    texture = _Texture(spec.texture, spec.seed, 8.0 * spec.background_depth / cam.fx)

    center_prev, center_next = _camera_centers(spec)
    origin = np.zeros(3)

    rgb_ref, depth_ref = _render_view(surfaces, texture, cam, origin, h, w)
    rgb_prev, _ = _render_view(surfaces, texture, cam, center_prev, h, w)
    rgb_next, _ = _render_view(surfaces, texture, cam, center_next, h, w)

    for name, center in (("prev", center_prev), ("next", center_next)):
        frac = _in_bounds_fraction(cam, depth_ref, center)
        if frac < MIN_IN_BOUNDS_FRACTION:
            raise ValueError(
                f"baseline {spec.baseline:g} leaves only {frac:.0%} of pixels "
                f"in bounds in the {name} view (need >= {MIN_IN_BOUNDS_FRACTION:.0%})"
            )

    occ_prev = _occlusion_labels(surfaces, cam, depth_ref, center_prev)
    occ_next = _occlusion_labels(surfaces, cam, depth_ref, center_next)

    true_depth = DepthMap(ScalarGrid(depth_ref), z_min=spec.z_min, z_max=spec.z_max)
    sparse = sample_sparse(
        true_depth,
        spec.default_sparse_count,
        spec.sparse_pattern,
        spec.seed,
        noise_sigma=spec.sparse_noise,
    )

    return SceneInstance(
        image_prev=ColorImage.from_array(rgb_prev),
        image_ref=ColorImage.from_array(rgb_ref),
        image_next=ColorImage.from_array(rgb_next),
        true_depth=true_depth,
        pose_prev=RigidPose.from_translation(*(-center_prev)),
        pose_next=RigidPose.from_translation(*(-center_next)),
        cam=cam,
        occluded_prev=occ_prev,
        occluded_next=occ_next,
        sparse=sparse,
        spec=spec,
    )


def _in_bounds_fraction(cam: CameraModel, true_depth: np.ndarray, center: np.ndarray) -> float:
    h, w = true_depth.shape
    rays = pixel_rays(cam, h, w)
    pts = rays * true_depth[..., None]
    z = pts[..., 2] - center[2]
    front = z > 0.0
    z_safe = np.where(front, z, 1.0)
    u = cam.fx * (pts[..., 0] - center[0]) / z_safe + cam.cx
    v = cam.fy * (pts[..., 1] - center[1]) / z_safe + cam.cy
    ok = front & (u >= 0.0) & (u <= w - 1.0) & (v >= 0.0) & (v <= h - 1.0)
    return float(ok.mean())


def sample_sparse(
    true_depth: DepthMap,
    count: int,
    pattern: str = "uniform-random",
    seed: int = 0,
    noise_sigma: float = 0.0,
) -> SparseDepthMap:
    """Sample ``count`` distinct pixels of the ground truth as measurements.

    Optional multiplicative log-normal noise with the given sigma.
    """
    h, w = true_depth.shape
    total = h * w
    if not (1 <= count <= total):
        raise ValueError(f"sparse count {count} outside [1, {total}]")
    if pattern not in SPARSE_PATTERNS:
        raise ValueError(f"unknown sparse pattern {pattern!r}; choose from {SPARSE_PATTERNS}")
    rng = np.random.default_rng(seed)

    if pattern == "uniform-random":
        flat = rng.choice(total, size=count, replace=False)
        rows, cols = np.divmod(flat, w)
    else:
        # One jittered sample per grid cell; with at most one cell per pixel
        # row/column the cells cover disjoint pixel ranges, so the chosen
        # pixels are distinct by construction.
        gw = min(w, max(1, round(math.sqrt(count * w / h))))
        gh = min(h, max(1, math.ceil(count / gw)))
        while gw * gh < count and gw < w:
            gw += 1
        gh = min(h, max(gh, math.ceil(count / gw)))
        x_edges = np.floor(np.linspace(0, w, gw + 1)).astype(int)
        y_edges = np.floor(np.linspace(0, h, gh + 1)).astype(int)
        cells = [(i, j) for j in range(gh) for i in range(gw)]
        order = rng.permutation(len(cells))[:count]
        rows = np.empty(count, dtype=np.int64)
        cols = np.empty(count, dtype=np.int64)
        for k, idx in enumerate(order):
            i, j = cells[idx]
            cols[k] = rng.integers(x_edges[i], x_edges[i + 1])
            rows[k] = rng.integers(y_edges[j], y_edges[j + 1])

    valid = np.zeros((h, w), dtype=bool)
    valid[rows, cols] = True
    depth = np.where(valid, true_depth.values, 0.0)
    if noise_sigma > 0.0:
        noise = np.exp(rng.normal(0.0, noise_sigma, size=(h, w)))
        depth = np.where(valid, np.clip(depth * noise, true_depth.z_min, true_depth.z_max), 0.0)
    # Zero placeholders off the subdomain are never read; keep the grid
    # finite by storing the measurements on a unit background.
    stored = np.where(valid, depth, 1.0)
    return SparseDepthMap(depth=ScalarGrid(stored), valid=valid)
