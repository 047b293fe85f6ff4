"""Residual-driven adaptive weights.

Two families of weights, both recomputed from residuals at every
optimization step:

* a soft visibility mask per auxiliary frame — a flipped sigmoid of the
  standardized photometric residual whose steepness and shift are annealed
  by the mean residual, so it starts flat near 1 and sharpens toward a
  binary occlusion mask as the fit improves;
* a regularization weight field — negative exponentials of the image and
  sparse-depth residuals, fused by preferring the depth-derived weight
  wherever a measurement exists.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .grid import ScalarGrid, as_mask
from .residual import NormalizedResidual

# Positive floor keeping weights strictly positive where the sigmoid or
# exponential underflows float64.
_WEIGHT_FLOOR = np.finfo(np.float64).tiny

# Pipeline-wide count of mean residuals that needed clamping into [0, 1];
# strictly diagnostic (the residual design guarantees the range).
_shift_clamp_count = 0


def shift_clamp_count() -> int:
    return _shift_clamp_count


def reset_shift_clamp_count() -> None:
    global _shift_clamp_count
    _shift_clamp_count = 0


@dataclass(frozen=True)
class AlphaConfig:
    """Annealing constants for the visibility mask.

    ``a0`` scales the sigmoid steepness, ``b0`` bounds its shift; both are
    calibrated for intensities in [0, 1].
    """

    a0: float = 0.10
    b0: float = 4.0
    eps: float = 1e-8

    def __post_init__(self):
        if self.a0 <= 0.0 or self.b0 <= 0.0 or self.eps <= 0.0:
            raise ValueError("a0, b0 and eps must be positive")


@dataclass(frozen=True)
class GammaConfig:
    """Scales for the image- and depth-residual regularization weights."""

    c_i: float = 1.0
    c_z: float = 0.01

    def __post_init__(self):
        if self.c_i <= 0.0 or self.c_z <= 0.0:
            raise ValueError("c_i and c_z must be positive")

    @classmethod
    def outdoor(cls) -> "GammaConfig":
        return cls(c_i=1.0, c_z=0.01)

    @classmethod
    def indoor(cls) -> "GammaConfig":
        """Softer image weighting for texture-poor indoor scenes."""
        return cls(c_i=0.70, c_z=0.01)


@dataclass(frozen=True)
class WeightBundle:
    """All adaptive weights for one optimization step, plus annealing state."""

    alpha: tuple[ScalarGrid, ...]
    gamma: ScalarGrid
    a: tuple[float, ...]
    b: tuple[float, ...]
    mu_tau: tuple[float, ...]
    mu_i: float
    mu_z: float

    def __post_init__(self):
        if not (len(self.alpha) == len(self.a) == len(self.b) == len(self.mu_tau)):
            raise ValueError("per-frame fields must have matching lengths")
        for grid in (*self.alpha, self.gamma):
            v = grid.values
            if v.min() <= 0.0 or v.max() > 1.0:
                raise ValueError("weights must lie in (0, 1]")
        for a_val in self.a:
            if a_val <= 0.0:
                raise ValueError("steepness must be positive")


def steepness(mu_tau: float, cfg: AlphaConfig) -> float:
    """Sigmoid steepness, inversely proportional to the mean residual."""
    return cfg.a0 / (mu_tau + cfg.eps)


def shift(mu_tau: float, cfg: AlphaConfig) -> float:
    """Sigmoid shift, decaying from 2*b0 to 0 as the mean residual shrinks.

    Out-of-range means are clamped into [0, 1] (counted, not fatal) so a
    long optimization survives a pathological residual field.
    """
    global _shift_clamp_count
    if mu_tau < 0.0 or mu_tau > 1.0:
        _shift_clamp_count += 1
        mu_tau = min(max(mu_tau, 0.0), 1.0)
    return cfg.b0 * (1.0 - np.cos(np.pi * mu_tau))


def annealed_mask(rho: np.ndarray, a: float, b: float) -> np.ndarray:
    """Flipped sigmoid 1 - 1/(1 + exp(-(a*rho - b))) with explicit a, b.

    Floored at the smallest positive float so the mask never degenerates
    to exact zero for finite residuals.
    """
    return np.maximum(expit(b - a * np.asarray(rho, dtype=np.float64)), _WEIGHT_FLOOR)


def visibility_mask(nr: NormalizedResidual, cfg: AlphaConfig) -> ScalarGrid:
    """Soft co-visibility weight in (0, 1], decreasing in the residual."""
    a = steepness(nr.mu, cfg)
    b = shift(nr.mu, cfg)
    return ScalarGrid(annealed_mask(nr.rho.values, a, b))


def gamma_image(delta_i: ScalarGrid, cfg: GammaConfig) -> tuple[ScalarGrid, float]:
    """Regularization weight from image residuals: exp(-c_i * mean * local)."""
    d = delta_i.values
    mu_i = float(d.mean())
    g = np.maximum(np.exp(-cfg.c_i * mu_i * d), _WEIGHT_FLOOR)
    return ScalarGrid(g), mu_i


def gamma_depth(
    delta_z: ScalarGrid, valid: np.ndarray, cfg: GammaConfig
) -> tuple[ScalarGrid, float]:
    """Regularization weight from sparse depth residuals.

    The mean is taken over the measured subdomain only; off it the weight
    is defined as 1 (a total function, though fusion never reads it there).
    """
    mask = as_mask(valid, delta_z.shape)
    n = int(mask.sum())
    if n == 0:
        raise ValueError("sparse depth domain is empty")
    d = delta_z.values
    mu_z = float(d[mask].sum() / n)
    g = np.where(mask, np.maximum(np.exp(-cfg.c_z * mu_z * d), _WEIGHT_FLOOR), 1.0)
    return ScalarGrid(g), mu_z


def fuse_gamma(gamma_i: ScalarGrid, gamma_z: ScalarGrid, valid: np.ndarray) -> ScalarGrid:
    """Prefer the depth-derived weight wherever a measurement exists."""
    if gamma_i.shape != gamma_z.shape:
        raise ValueError("weight grids must share dimensions")
    mask = as_mask(valid, gamma_i.shape)
    return ScalarGrid(np.where(mask, gamma_z.values, gamma_i.values))


def compute_weights(
    normalized: list[NormalizedResidual],
    delta_i: ScalarGrid,
    delta_z: ScalarGrid,
    valid: np.ndarray,
    alpha_cfg: AlphaConfig,
    gamma_cfg: GammaConfig,
) -> WeightBundle:
    """Assemble the full weight set for one step from current residuals."""
    alphas = []
    a_vals = []
    b_vals = []
    mus = []
    for nr in normalized:
        a = steepness(nr.mu, alpha_cfg)
        b = shift(nr.mu, alpha_cfg)
        alphas.append(ScalarGrid(annealed_mask(nr.rho.values, a, b)))
        a_vals.append(a)
        b_vals.append(b)
        mus.append(nr.mu)
    g_i, mu_i = gamma_image(delta_i, gamma_cfg)
    g_z, mu_z = gamma_depth(delta_z, valid, gamma_cfg)
    gamma = fuse_gamma(g_i, g_z, valid)
    return WeightBundle(
        alpha=tuple(alphas),
        gamma=gamma,
        a=tuple(a_vals),
        b=tuple(b_vals),
        mu_tau=tuple(mus),
        mu_i=mu_i,
        mu_z=mu_z,
    )
