"""The weighted loss and its analytic gradient in log-depth.

Three terms: visibility-weighted photometric reconstruction error, sparse
depth fidelity, and weighted quadratic smoothness. The weight maps are
treated as constants here — the alternating scheme freezes them while the
depth field is updated — so the gradient flows only through the depth.

Optimization is carried out in log-depth, which keeps the field positive
without projection; every term's gradient therefore carries a factor of
the depth itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import warp as warp_mod
from .grid import (
    CameraModel,
    ColorImage,
    DepthMap,
    RigidPose,
    ScalarGrid,
    SparseDepthMap,
    forward_gradient,
    sample_channel_gradient,
)
from .residual import photometric_residual, sparse_depth_residual
from .warp import WarpResult


@dataclass(frozen=True)
class LossWeights:
    """Static outer trade-off scalars for the three loss terms."""

    w_ph: float = 1.0
    w_z: float = 2e-3
    w_sm: float = 0.5

    def __post_init__(self):
        if self.w_ph < 0.0 or self.w_z < 0.0 or self.w_sm < 0.0:
            raise ValueError("loss weights must be non-negative")
        if self.w_ph == 0.0 and self.w_z == 0.0 and self.w_sm == 0.0:
            raise ValueError("at least one loss weight must be positive")


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    photometric: float
    sparse: float
    smoothness: float
    per_frame_photometric: tuple[float, ...]


@dataclass(frozen=True)
class ObjectiveState:
    """Everything the loss reads: inputs, current depth, and frozen weights.

    ``warps``, ``deltas`` and ``delta_z`` are derived from the rest; use
    :func:`make_state` to fill them in (or pass precomputed ones through)."""

    ref: ColorImage
    aux: tuple[ColorImage, ...]
    poses: tuple[RigidPose, ...]
    cam: CameraModel
    depth: DepthMap
    sparse: SparseDepthMap
    alphas: tuple[ScalarGrid, ...]
    gamma: ScalarGrid
    warps: tuple[WarpResult, ...] = field(repr=False, default=())
    deltas: tuple[ScalarGrid, ...] = field(repr=False, default=())
    delta_z: ScalarGrid | None = field(repr=False, default=None)


def make_state(
    ref: ColorImage,
    aux: tuple[ColorImage, ...],
    poses: tuple[RigidPose, ...],
    cam: CameraModel,
    depth: DepthMap,
    sparse: SparseDepthMap,
    alphas: tuple[ScalarGrid, ...],
    gamma: ScalarGrid,
    warps: tuple[WarpResult, ...] | None = None,
    deltas: tuple[ScalarGrid, ...] | None = None,
) -> ObjectiveState:
    """Build a state, computing warps and residuals unless supplied."""
    if len(aux) != len(poses) or len(aux) != len(alphas):
        raise ValueError("aux frames, poses and visibility weights must align")
    if warps is None:
        warps = tuple(warp_mod.reconstruct(img, depth, cam, pose) for img, pose in zip(aux, poses))
    if deltas is None:
        deltas = tuple(
            photometric_residual(ref, w.reconstructed, w.in_bounds) for w in warps
        )
    delta_z = sparse_depth_residual(depth, sparse)
    return ObjectiveState(
        ref=ref,
        aux=tuple(aux),
        poses=tuple(poses),
        cam=cam,
        depth=depth,
        sparse=sparse,
        alphas=tuple(alphas),
        gamma=gamma,
        warps=tuple(warps),
        deltas=tuple(deltas),
        delta_z=delta_z,
    )


def photometric_term(deltas: list[ScalarGrid], alphas: list[ScalarGrid]) -> float:
    """Visibility-weighted mean photometric residual, averaged over frames."""
    if len(deltas) != len(alphas) or not deltas:
        raise ValueError("need matching, non-empty residual and weight lists")
    total = 0.0
    for d, a in zip(deltas, alphas):
        if d.shape != a.shape:
            raise ValueError("residual and weight grids must share dimensions")
        total += float((a.values * d.values).mean())
    return total / len(deltas)


def sparse_term(delta_z: ScalarGrid, valid: np.ndarray) -> float:
    """Mean absolute depth error over the measured subdomain."""
    n = int(np.asarray(valid, dtype=bool).sum())
    if n == 0:
        raise ValueError("sparse depth domain is empty")
    return float(delta_z.values[valid].sum() / n)


def smoothness_term(depth: DepthMap, gamma: ScalarGrid) -> float:
    """Weighted squared forward-difference energy of the depth field."""
    if depth.shape != gamma.shape:
        raise ValueError("depth and weight grids must share dimensions")
    gx, gy = forward_gradient(depth.grid)
    return float((gamma.values * (gx.values**2 + gy.values**2)).mean())


def total_loss(state: ObjectiveState, weights: LossWeights) -> LossBreakdown:
    """Assemble the weighted objective from a fully-populated state."""
    per_frame = tuple(
        float((a.values * d.values).mean()) for d, a in zip(state.deltas, state.alphas)
    )
    ph = sum(per_frame) / len(per_frame)
    sp = sparse_term(state.delta_z, state.sparse.valid)
    sm = smoothness_term(state.depth, state.gamma)
    total = weights.w_ph * ph + weights.w_z * sp + weights.w_sm * sm
    return LossBreakdown(
        total=total,
        photometric=ph,
        sparse=sp,
        smoothness=sm,
        per_frame_photometric=per_frame,
    )


def loss_gradient(state: ObjectiveState, weights: LossWeights) -> ScalarGrid:
    """d(total loss) / d(log depth) per pixel, with weight maps held fixed.

    Photometric: the sign of the per-channel intensity error, chained
    through the auxiliary image's gradient at the sample point and the
    warped coordinates' depth derivative. Pixels flagged out of bounds
    carry a constant residual and contribute nothing.

    Sparse: the L1 subgradient on the measured subdomain (zero at exact
    agreement).

    Smoothness: the adjoint of the forward-difference stencil with the
    per-pixel weight; each pixel collects from its own differences and
    from its left/upper neighbors'.
    """
    h, w = state.depth.shape
    n = float(h * w)
    z = state.depth.values
    grad = np.zeros((h, w))

    if weights.w_ph > 0.0:
        ref_stack = state.ref.stacked()
        coeff = weights.w_ph / (len(state.warps) * n)
        for aux_img, wres, alpha in zip(state.aux, state.warps, state.alphas):
            gu, gv = sample_channel_gradient(
                aux_img.stacked(), wres.warped_u.values, wres.warped_v.values
            )
            sgn = np.sign(wres.reconstructed.stacked() - ref_stack)
            d_delta_dz = (
                sgn * (gu * wres.du_dz.values[..., None] + gv * wres.dv_dz.values[..., None])
            ).mean(axis=-1)
            d_delta_dz = np.where(wres.in_bounds, d_delta_dz, 0.0)
            grad += coeff * alpha.values * d_delta_dz

    if weights.w_z > 0.0:
        sp = state.sparse
        sub = np.where(sp.valid, np.sign(z - sp.depth.values), 0.0)
        grad += (weights.w_z / sp.count) * sub

    if weights.w_sm > 0.0:
        gx, gy = forward_gradient(state.depth.grid)
        tx = 2.0 * state.gamma.values * gx.values
        ty = 2.0 * state.gamma.values * gy.values
        acc = -tx - ty
        acc[:, 1:] += tx[:, :-1]
        acc[1:, :] += ty[:-1, :]
        grad += (weights.w_sm / n) * acc

    return ScalarGrid(grad * z)
