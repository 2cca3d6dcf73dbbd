"""Sequence windowing for recurrent training and min-max feature scaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ShapeError


@dataclass(frozen=True)
class SequenceBatch:
    """Windowed inputs (windows x s x features) and aligned targets.

    Window j covers input steps j..j+s-1 of the source series; its target
    is the output at step j+s-1. A series of n_t steps yields n_t - s
    windows, so targets cover steps s-1..n_t-2 (0-based).
    """

    windows: np.ndarray
    targets: np.ndarray
    sequence_length: int

    def __post_init__(self):
        if self.windows.ndim != 3:
            raise ShapeError(f"windows must be 3-D, got {self.windows.shape}")
        if self.windows.shape[0] != self.targets.shape[0]:
            raise ShapeError(
                f"{self.windows.shape[0]} windows vs {self.targets.shape[0]} targets"
            )
        if self.windows.shape[1] != self.sequence_length:
            raise ShapeError("window length disagrees with sequence_length")

    @property
    def n_windows(self) -> int:
        return self.windows.shape[0]

    @property
    def first_target_step(self) -> int:
        """Global step index of the first target row."""
        return self.sequence_length - 1


def make_sequences(inputs: np.ndarray, outputs: np.ndarray, s: int) -> SequenceBatch:
    """Slice an aligned (inputs, outputs) series into training windows."""
    inputs = np.asarray(inputs, dtype=float)
    outputs = np.asarray(outputs, dtype=float)
    if inputs.ndim != 2 or outputs.ndim != 2:
        raise ShapeError("inputs and outputs must be 2-D (steps x features)")
    n_t = inputs.shape[0]
    if outputs.shape[0] != n_t:
        raise ShapeError(f"inputs have {n_t} steps, outputs {outputs.shape[0]}")
    if s < 1:
        raise ConfigError(f"sequence length {s} must be at least 1")
    if n_t <= s:
        raise ConfigError(f"series length {n_t} must exceed sequence length {s}")
    n_win = n_t - s
    windows = np.stack([inputs[j : j + s] for j in range(n_win)])
    targets = outputs[s - 1 : n_t - 1].copy()
    return SequenceBatch(windows=windows, targets=targets, sequence_length=s)


class MinMaxScaler:
    """Per-feature affine map onto [-1, 1] with exact inverse.

    Degenerate features (range below ``rtol`` times their magnitude) map to
    zero and invert back to their constant value.
    """

    def __init__(self, scale=None, center=None):
        self.scale = scale
        self.center = center

    @classmethod
    def fit(cls, values: np.ndarray, rtol: float = 1e-12) -> "MinMaxScaler":
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise ShapeError("scaler expects 2-D (samples x features)")
        lo = values.min(axis=0)
        hi = values.max(axis=0)
        center = 0.5 * (hi + lo)
        half = 0.5 * (hi - lo)
        floor = rtol * np.maximum(np.abs(hi), 1.0)
        half = np.where(half <= floor, 1.0, half)
        return cls(scale=half, center=center)

    @classmethod
    def identity(cls, n_features: int) -> "MinMaxScaler":
        return cls(scale=np.ones(n_features), center=np.zeros(n_features))

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.center) / self.scale

    def inverse(self, scaled: np.ndarray) -> np.ndarray:
        return scaled * self.scale + self.center
