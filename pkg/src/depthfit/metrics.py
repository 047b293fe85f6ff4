"""Benchmark error metrics for depth predictions.

MAE/RMSE on depth and iMAE/iRMSE on inverse depth, in meters and inverse
meters. Unit conversion for display (mm, 1/km) is left to the CLI.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DepthMap, as_mask


@dataclass(frozen=True)
class MetricReport:
    mae: float
    rmse: float
    imae: float
    irmse: float
    evaluated_pixels: int

    def __post_init__(self):
        slack = 1e-12 * max(1.0, self.rmse)
        if self.mae < 0.0 or self.rmse < self.mae - slack:
            raise ValueError("require rmse >= mae >= 0")
        if self.imae < 0.0 or self.irmse < self.imae - slack:
            raise ValueError("require irmse >= imae >= 0")

    def as_row(self) -> dict[str, float]:
        return {
            "mae": self.mae,
            "rmse": self.rmse,
            "imae": self.imae,
            "irmse": self.irmse,
            "evaluated_pixels": self.evaluated_pixels,
        }


def evaluate(pred: DepthMap, gt: DepthMap, mask: np.ndarray | None = None) -> MetricReport:
    """Compute the four error metrics over ``mask`` (default: full domain)."""
    if pred.shape != gt.shape:
        raise ValueError(f"depth dimensions differ: {pred.shape} vs {gt.shape}")
    if mask is None:
        mask = np.ones(pred.shape, dtype=bool)
    mask = as_mask(mask, pred.shape)
    n = int(mask.sum())
    if n == 0:
        raise ValueError("evaluation mask selects no pixels")

    p = pred.values[mask]
    g = gt.values[mask]
    if np.any(p <= 0.0) or np.any(g <= 0.0):
        raise ValueError("depths must be strictly positive on the evaluation mask")

    err = np.abs(p - g)
    ierr = np.abs(1.0 / p - 1.0 / g)
    return MetricReport(
        mae=float(err.mean()),
        rmse=float(np.sqrt(np.mean(err * err))),
        imae=float(ierr.mean()),
        irmse=float(np.sqrt(np.mean(ierr * ierr))),
        evaluated_pixels=n,
    )
