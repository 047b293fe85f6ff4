"""Flat key = value experiment configuration.

One text file drives scene generation, sparse sampling, and the solver.
Unknown keys are rejected with their line number, and every value is
validated against the owning type's invariants before any work starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .adaweight import AlphaConfig, GammaConfig
from .objective import LossWeights
from .scenegen import LAYOUTS, MOTIONS, SPARSE_PATTERNS, TEXTURES, SceneSpec
from .solver import INIT_MODES, WEIGHTINGS, SolverConfig


class ConfigError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _enum(choices):
    def parse(text: str) -> str:
        if text not in choices:
            raise ValueError(f"expected one of {', '.join(choices)}; got {text!r}")
        return text

    return parse


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated bundle of everything one experiment run needs."""

    scene: SceneSpec = field(default_factory=SceneSpec)
    solver: SolverConfig = field(default_factory=SolverConfig)
    sparse_density: float = 0.005
    snapshot_interval: int = 0  # 0 disables weight-map snapshots

    def sparse_count(self) -> int:
        return max(1, round(self.sparse_density * self.scene.width * self.scene.height))

    def scene_spec(self) -> SceneSpec:
        """Scene spec with the sparse count derived from the density."""
        return replace(self.scene, sparse_count=self.sparse_count())


# key -> (section, field, parser); sections name the sub-config the key
# lands in so defaults stay in one place (the dataclasses).
_SCHEMA = {
    "layout": ("scene", "layout", _enum(LAYOUTS)),
    "texture": ("scene", "texture", _enum(TEXTURES)),
    "image_width": ("scene", "width", int),
    "image_height": ("scene", "height", int),
    "background_depth": ("scene", "background_depth", float),
    "box_depth": ("scene", "box_depth", float),
    "box_center_x": ("scene", "box_center_x", float),
    "box_center_y": ("scene", "box_center_y", float),
    "box_width": ("scene", "box_width", float),
    "box_height": ("scene", "box_height", float),
    "num_stairs": ("scene", "num_stairs", int),
    "stair_near_depth": ("scene", "stair_near_depth", float),
    "baseline": ("scene", "baseline", float),
    "motion": ("scene", "motion", _enum(MOTIONS)),
    "focal_px": ("scene", "focal_px", float),
    "z_min": ("scene", "z_min", float),
    "z_max": ("scene", "z_max", float),
    "seed": ("scene", "seed", int),
    "sparse_density": ("top", "sparse_density", float),
    "sparse_pattern": ("scene", "sparse_pattern", _enum(SPARSE_PATTERNS)),
    "sparse_noise": ("scene", "sparse_noise", float),
    "max_steps": ("solver", "max_steps", int),
    "step_size": ("solver", "step_size", float),
    "step_decay": ("solver", "step_decay", float),
    "init_mode": ("solver", "init_mode", _enum(INIT_MODES)),
    "weighting": ("solver", "weighting", _enum(WEIGHTINGS)),
    "convergence_tol": ("solver", "convergence_tol", float),
    "a0": ("alpha", "a0", float),
    "b0": ("alpha", "b0", float),
    "eps": ("alpha", "eps", float),
    "c_i": ("gamma", "c_i", float),
    "c_z": ("gamma", "c_z", float),
    "w_ph": ("loss", "w_ph", float),
    "w_z": ("loss", "w_z", float),
    "w_sm": ("loss", "w_sm", float),
    "snapshot_interval": ("top", "snapshot_interval", int),
}

SUPPORTED_KEYS = tuple(sorted(_SCHEMA))

# Sweepable parameter -> config key it overrides ('density' maps onto the
# sparse density rather than a literal key).
SWEEP_PARAMS = ("c_i", "c_z", "a0", "b0", "w_ph", "w_z", "w_sm", "step_size", "density")


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    sections: dict[str, dict[str, object]] = {
        "scene": {},
        "solver": {},
        "alpha": {},
        "gamma": {},
        "loss": {},
        "top": {},
    }
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.partition("#")[0].strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        if key not in _SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        section, attr, parser = _SCHEMA[key]
        try:
            sections[section][attr] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: invalid value for {key}: {exc}") from exc

    scene_kwargs = dict(sections["scene"])
    box_center = (
        scene_kwargs.pop("box_center_x", 0.0),
        scene_kwargs.pop("box_center_y", 0.0),
    )
    box_size = (
        scene_kwargs.pop("box_width", SceneSpec().box_size[0]),
        scene_kwargs.pop("box_height", SceneSpec().box_size[1]),
    )
    try:
        scene = SceneSpec(box_center=box_center, box_size=box_size, **scene_kwargs)
        solver = SolverConfig(
            alpha_cfg=AlphaConfig(**sections["alpha"]),
            gamma_cfg=GammaConfig(**sections["gamma"]),
            loss_weights=LossWeights(**sections["loss"]),
            seed=scene.seed,
            **sections["solver"],
        )
        top = sections["top"]
        cfg = ExperimentConfig(
            scene=scene,
            solver=solver,
            sparse_density=float(top.get("sparse_density", 0.005)),
            snapshot_interval=int(top.get("snapshot_interval", 0)),
        )
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if cfg.sparse_density <= 0.0 or cfg.sparse_density > 1.0:
        raise ConfigError(f"{source}: sparse_density must lie in (0, 1]")
    if cfg.snapshot_interval < 0:
        raise ConfigError(f"{source}: snapshot_interval must be non-negative")
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read(), source=str(path))


def apply_sweep_value(cfg: ExperimentConfig, param: str, value: float) -> ExperimentConfig:
    """Return a config with one sweepable parameter overridden."""
    if param not in SWEEP_PARAMS:
        raise ConfigError(
            f"unsupported sweep parameter {param!r}; supported: {', '.join(SWEEP_PARAMS)}"
        )
    if param == "density":
        return replace(cfg, sparse_density=float(value))
    solver = cfg.solver
    if param in ("a0", "b0"):
        alpha = replace(solver.alpha_cfg, **{param: float(value)})
        return replace(cfg, solver=replace(solver, alpha_cfg=alpha))
    if param in ("c_i", "c_z"):
        gamma = replace(solver.gamma_cfg, **{param: float(value)})
        return replace(cfg, solver=replace(solver, gamma_cfg=gamma))
    if param in ("w_ph", "w_z", "w_sm"):
        loss = replace(solver.loss_weights, **{param: float(value)})
        return replace(cfg, solver=replace(solver, loss_weights=loss))
    return replace(cfg, solver=replace(solver, step_size=float(value)))


def override_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    return replace(
        cfg,
        scene=replace(cfg.scene, seed=seed),
        solver=replace(cfg.solver, seed=seed),
    )


def config_fields() -> dict[str, str]:
    """Supported keys and the config sections they belong to (for docs)."""
    return {key: _SCHEMA[key][0] for key in SUPPORTED_KEYS}
