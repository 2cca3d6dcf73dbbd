"""Scalar loss terms and the relative-error metric."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, ShapeError, UndefinedMetricError


def data_loss(y_pred: np.ndarray, y_actual: np.ndarray, indices) -> float:
    """Mean squared error over the selected supervision rows only."""
    y_pred = np.atleast_2d(np.asarray(y_pred, dtype=float))
    y_actual = np.atleast_2d(np.asarray(y_actual, dtype=float))
    if y_pred.shape != y_actual.shape:
        raise ShapeError(f"prediction {y_pred.shape} vs reference {y_actual.shape}")
    indices = np.asarray(indices, dtype=int)
    if indices.size == 0:
        raise ConfigError("supervision index set is empty")
    if indices.min() < 0 or indices.max() >= y_pred.shape[0]:
        raise ConfigError(
            f"supervision indices outside 0..{y_pred.shape[0] - 1}"
        )
    diff = y_pred[indices] - y_actual[indices]
    return float(np.mean(diff**2))


def masked_mse(y_pred: np.ndarray, y_actual: np.ndarray, mask: np.ndarray) -> float:
    """Mean squared error over the True entries of ``mask``."""
    count = int(mask.sum())
    if count == 0:
        raise ConfigError("supervision mask is empty")
    diff = (y_pred - y_actual) * mask
    return float(np.sum(diff**2) / count)


def physics_loss(residual: np.ndarray, n_eqn: int) -> float:
    """Sum of squared residual entries divided by the number of
    evaluation points."""
    if n_eqn <= 0:
        raise ConfigError(f"n_eqn={n_eqn} must be positive")
    with np.errstate(over="ignore"):  # divergence is reported by the caller
        return float(np.sum(np.asarray(residual, dtype=float) ** 2) / n_eqn)


def relative_error(y_pred: np.ndarray, y_actual: np.ndarray) -> float:
    """sqrt(sum of squared deviations) over sqrt(sum of squared reference
    values), both flattened."""
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    y_actual = np.asarray(y_actual, dtype=float).ravel()
    if y_pred.shape != y_actual.shape:
        raise ShapeError(f"series lengths differ: {y_pred.shape} vs {y_actual.shape}")
    denom = np.sqrt(np.sum(y_actual**2))
    if denom == 0.0:
        raise UndefinedMetricError("reference series is identically zero")
    return float(np.sqrt(np.sum((y_pred - y_actual) ** 2)) / denom)
