"""Per-pixel residuals and their normalization.

The photometric residual of a reconstruction, its standardized form (used to
drive the visibility weights), the minimum residual across auxiliary frames,
and the sparse depth residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ColorImage, DepthMap, ScalarGrid, SparseDepthMap, as_mask

DEFAULT_EPS = 1e-8

# Residual assigned to pixels whose warped sample left the auxiliary image:
# the maximum for [0, 1] intensities, so invisible regions are routed to the
# visibility weights instead of being silently skipped.
OUT_OF_BOUNDS_RESIDUAL = 1.0


@dataclass(frozen=True)
class NormalizedResidual:
    """A residual field standardized to zero mean and (near) unit variance.

    ``sigma2`` is the population variance of the raw residuals. When it is
    large against the stabilizer eps, var(rho) is 1 up to O(eps/sigma2);
    for (near-)constant fields rho collapses to zero instead of blowing up.
    """

    rho: ScalarGrid
    mu: float
    sigma2: float

    def __post_init__(self):
        if self.sigma2 < 0.0:
            raise ValueError("variance cannot be negative")
        r = self.rho.values
        n = r.size
        if abs(r.sum() / n) > 1e-6:
            raise ValueError("normalized residuals must have zero mean")
        if self.sigma2 > 1e-5:  # away from the stabilizer-dominated regime
            var = float(np.mean(r * r))
            if abs(var - 1.0) > 1e-3:
                raise ValueError("normalized residuals must have unit variance")


def photometric_residual(
    ref: ColorImage, recon: ColorImage, in_bounds: np.ndarray | None = None
) -> ScalarGrid:
    """Channel-mean absolute intensity difference, in [0, 1].

    If ``in_bounds`` is given, pixels outside it are assigned the maximum
    residual instead of their clamp-sampled difference.
    """
    if ref.shape != recon.shape:
        raise ValueError(f"image dimensions differ: {ref.shape} vs {recon.shape}")
    delta = np.abs(ref.stacked() - recon.stacked()).mean(axis=-1)
    if in_bounds is not None:
        mask = as_mask(in_bounds, ref.shape)
        delta = np.where(mask, delta, OUT_OF_BOUNDS_RESIDUAL)
    return ScalarGrid(delta)


def normalize(delta: ScalarGrid, eps: float = DEFAULT_EPS) -> NormalizedResidual:
    """Standardize a residual field: rho = (delta - mean) / sqrt(var + eps).

    Uses the population variance over the full domain. A constant field
    yields rho identically zero.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    d = delta.values
    mu = float(d.mean())
    centered = d - mu
    sigma2 = float(np.mean(centered * centered))
    rho = centered / np.sqrt(sigma2 + eps)
    # Remove the O(1e-17) mean left by summation order so downstream
    # consumers can rely on exact centering.
    rho = rho - rho.mean()
    return NormalizedResidual(rho=ScalarGrid(rho), mu=mu, sigma2=sigma2)


def min_image_residual(deltas: list[ScalarGrid]) -> ScalarGrid:
    """Elementwise minimum residual across reconstructions."""
    if not deltas:
        raise ValueError("need at least one residual grid")
    shape = deltas[0].shape
    for d in deltas[1:]:
        if d.shape != shape:
            raise ValueError("residual grids must share dimensions")
    out = deltas[0].values
    for d in deltas[1:]:
        out = np.minimum(out, d.values)
    return ScalarGrid(out)


def sparse_depth_residual(pred: DepthMap, sparse: SparseDepthMap) -> ScalarGrid:
    """|prediction - measurement| on the measured subdomain, zero elsewhere."""
    if pred.shape != sparse.depth.shape:
        raise ValueError(
            f"depth dimensions differ: {pred.shape} vs {sparse.depth.shape}"
        )
    diff = np.abs(pred.values - sparse.depth.values)
    return ScalarGrid(np.where(sparse.valid, diff, 0.0))
