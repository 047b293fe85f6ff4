"""Direct optimization of the dense log-depth field.

Each step alternates: reconstruct the reference view from both auxiliary
frames at the current depth, recompute residuals, regenerate the weights
(adaptive, static, or an edge-aware baseline), then take one gradient step
on log-depth with the weights held fixed. The loop is deterministic for a
fixed configuration and scene.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import adaweight, metrics, objective, residual
from . import warp as warp_mod
from .adaweight import AlphaConfig, GammaConfig, WeightBundle
from .grid import DepthMap, ScalarGrid, SparseDepthMap, forward_gradient
from .objective import LossBreakdown, LossWeights
from .scenegen import SceneInstance

INIT_MODES = ("sparse-interpolated", "constant", "noisy-ground-truth")
WEIGHTINGS = ("adaptive", "static", "edge-aware", "alpha-only", "gamma-only")

# Steps between applications of the geometric step-size decay, and the
# look-back window for the relative-change convergence test.
DECAY_INTERVAL = 100
CONVERGENCE_WINDOW = 10

DIVERGENCE_LOSS = 1e6


@dataclass(frozen=True)
class SolverConfig:
    max_steps: int = 1500
    step_size: float = 60.0
    step_decay: float = 0.97
    init_mode: str = "sparse-interpolated"
    weighting: str = "adaptive"
    convergence_tol: float = 1e-7
    alpha_cfg: AlphaConfig = field(default_factory=AlphaConfig)
    gamma_cfg: GammaConfig = field(default_factory=GammaConfig)
    loss_weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.step_size <= 0.0:
            raise ValueError("step_size must be positive")
        if not (0.0 < self.step_decay <= 1.0):
            raise ValueError("step_decay must lie in (0, 1]")
        if self.convergence_tol <= 0.0:
            raise ValueError("convergence_tol must be positive")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"unknown init mode {self.init_mode!r}; choose from {INIT_MODES}")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"unknown weighting {self.weighting!r}; choose from {WEIGHTINGS}")


@dataclass(frozen=True)
class TraceRecord:
    step: int
    loss: LossBreakdown
    mu_tau: tuple[float, float]
    mu_i: float
    mu_z: float
    a: tuple[float, float]
    b: tuple[float, float]
    report: metrics.MetricReport


@dataclass
class SolveTrace:
    records: list[TraceRecord] = field(default_factory=list)
    stop_reason: str = "max_steps"

    def __len__(self) -> int:
        return len(self.records)

    @property
    def losses(self) -> list[float]:
        return [r.loss.total for r in self.records]


class SolveDivergedError(RuntimeError):
    """Optimization blew up; carries the trace collected so far."""

    def __init__(self, message: str, trace: SolveTrace):
        super().__init__(message)
        self.trace = trace


def init_depth(
    sparse: SparseDepthMap,
    mode: str,
    seed: int,
    true_depth: DepthMap | None = None,
    z_min: float | None = None,
    z_max: float | None = None,
) -> DepthMap:
    """Initial dense depth from the sparse measurements.

    sparse-interpolated: nearest-measurement fill followed by a 5x5 box
    blur. constant: the mean measured depth everywhere. noisy-ground-truth
    (test-only): the ground truth with multiplicative log-normal noise.
    """
    if mode not in INIT_MODES:
        raise ValueError(f"unknown init mode {mode!r}; choose from {INIT_MODES}")
    if z_min is None:
        z_min = true_depth.z_min if true_depth is not None else 0.1
    if z_max is None:
        z_max = true_depth.z_max if true_depth is not None else 100.0

    if mode == "noisy-ground-truth":
        if true_depth is None:
            raise ValueError("noisy-ground-truth init requires the true depth")
        rng = np.random.default_rng(seed)
        noisy = true_depth.values * np.exp(rng.normal(0.0, 0.1, true_depth.shape))
        return DepthMap(ScalarGrid(np.clip(noisy, z_min, z_max)), z_min, z_max)

    if mode == "constant":
        mean = float(sparse.depth.values[sparse.valid].mean())
        filled = np.full(sparse.depth.shape, np.clip(mean, z_min, z_max))
        return DepthMap(ScalarGrid(filled), z_min, z_max)

    # Nearest-valid fill via a distance transform, then a small box blur.
    _, (iy, ix) = ndimage.distance_transform_edt(~sparse.valid, return_indices=True)
    filled = sparse.depth.values[iy, ix]
    blurred = ndimage.uniform_filter(filled, size=5, mode="nearest")
    return DepthMap(ScalarGrid(np.clip(blurred, z_min, z_max)), z_min, z_max)


def edge_aware_gamma(image) -> ScalarGrid:
    """Static image-gradient weighting: exp(-|grad I|) with the channel-mean
    forward-difference magnitude."""
    mag = np.zeros(image.shape)
    for ch in image.channels:
        gx, gy = forward_gradient(ch)
        mag += np.sqrt(gx.values**2 + gy.values**2)
    return ScalarGrid(np.exp(-mag / 3.0))


def _weight_maps(
    cfg: SolverConfig,
    bundle: WeightBundle,
    static_gamma: ScalarGrid,
    ones: ScalarGrid,
) -> tuple[tuple[ScalarGrid, ...], ScalarGrid]:
    """Select the weight maps the chosen scheme actually applies."""
    if cfg.weighting == "adaptive":
        return bundle.alpha, bundle.gamma
    if cfg.weighting == "alpha-only":
        return bundle.alpha, ones
    if cfg.weighting == "gamma-only":
        return (ones, ones), bundle.gamma
    if cfg.weighting == "edge-aware":
        return (ones, ones), static_gamma
    return (ones, ones), ones


def solve(scene: SceneInstance, cfg: SolverConfig, snapshot_fn=None) -> tuple[DepthMap, SolveTrace]:
    """Run the alternating loop on one scene.

    ``snapshot_fn(step, alphas, gamma)`` is invoked after the weights of
    each step are formed, before the depth update; use it to export or
    inspect weight maps.

    Raises :class:`SolveDivergedError` (with the partial trace attached)
    if the loss becomes non-finite or exceeds the divergence bound.
    """
    depth = init_depth(
        scene.sparse, cfg.init_mode, cfg.seed, true_depth=scene.true_depth
    )
    z_min, z_max = depth.z_min, depth.z_max
    log_lo, log_hi = np.log(z_min), np.log(z_max)

    ones = ScalarGrid.full(depth.shape[0], depth.shape[1], 1.0)
    static_gamma = edge_aware_gamma(scene.image_ref)

    trace = SolveTrace()
    log_depth = np.log(depth.values)

    for step in range(cfg.max_steps):
        depth = DepthMap(ScalarGrid(np.exp(np.clip(log_depth, log_lo, log_hi))), z_min, z_max)

        warps = tuple(
            warp_mod.reconstruct(img, depth, scene.cam, pose)
            for img, pose in zip(scene.aux_images, scene.poses)
        )
        deltas = tuple(
            residual.photometric_residual(scene.image_ref, w.reconstructed, w.in_bounds)
            for w in warps
        )
        normalized = [residual.normalize(d, cfg.alpha_cfg.eps) for d in deltas]
        delta_i = residual.min_image_residual(list(deltas))
        delta_z = residual.sparse_depth_residual(depth, scene.sparse)

        # The annealing state is recorded every step regardless of which
        # weight maps the scheme applies, so traces stay comparable.
        bundle = adaweight.compute_weights(
            normalized, delta_i, delta_z, scene.sparse.valid, cfg.alpha_cfg, cfg.gamma_cfg
        )
        alphas, gamma = _weight_maps(cfg, bundle, static_gamma, ones)

        if snapshot_fn is not None:
            snapshot_fn(step, alphas, gamma)

        state = objective.make_state(
            ref=scene.image_ref,
            aux=scene.aux_images,
            poses=scene.poses,
            cam=scene.cam,
            depth=depth,
            sparse=scene.sparse,
            alphas=alphas,
            gamma=gamma,
            warps=warps,
            deltas=deltas,
        )
        breakdown = objective.total_loss(state, cfg.loss_weights)
        report = metrics.evaluate(depth, scene.true_depth)
        trace.records.append(
            TraceRecord(
                step=step,
                loss=breakdown,
                mu_tau=bundle.mu_tau,
                mu_i=bundle.mu_i,
                mu_z=bundle.mu_z,
                a=bundle.a,
                b=bundle.b,
                report=report,
            )
        )

        if not np.isfinite(breakdown.total) or breakdown.total > DIVERGENCE_LOSS:
            trace.stop_reason = "diverged"
            raise SolveDivergedError(
                f"loss {breakdown.total:g} at step {step} exceeds the divergence bound",
                trace,
            )

        losses = trace.losses
        if step >= CONVERGENCE_WINDOW:
            prev = losses[step - CONVERGENCE_WINDOW]
            rel = abs(prev - losses[step]) / max(abs(prev), 1e-30)
            if rel < cfg.convergence_tol:
                trace.stop_reason = "converged"
                break
        if step == cfg.max_steps - 1:
            break

        grad = objective.loss_gradient(state, cfg.loss_weights)
        lr = cfg.step_size * cfg.step_decay ** (step // DECAY_INTERVAL)
        log_depth = np.clip(log_depth - lr * grad.values, log_lo, log_hi)

    # The returned field is exactly the state the last trace record measured.
    depth = DepthMap(ScalarGrid(np.exp(np.clip(log_depth, log_lo, log_hi))), z_min, z_max)
    return depth, trace
