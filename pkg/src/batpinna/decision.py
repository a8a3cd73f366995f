"""Multi-level moving-window token counting over pulse-train estimates.

Level 1 slides a closed window ``[x, x + L]`` from ``x = min(values)`` in
steps of ``l`` until the right edge first reaches ``max(values)``.  At
every position each sample inside the window earns as many tokens as
there are samples in the window.  The sample with the most tokens wins;
ties go to the midpoint of the leftmost and rightmost tied samples.

Level k repeats the procedure with window ``L / 2**(k-1)`` on the samples
lying inside the previous level's window centred on its winner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class MovingWindowConfig:
    window_length: float = 8.0
    step: float = 1.0
    levels: int = 3

    def __post_init__(self):
        if self.window_length <= 0:
            raise ValueError("window length must be positive")
        if not 0 < self.step <= self.window_length:
            raise ValueError("step must lie in (0, window_length]")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")


@dataclass(frozen=True)
class PulseTrainEstimate:
    values: np.ndarray
    config: MovingWindowConfig
    result: float
    level_winners: tuple[float, ...] = field(default=())


def window_positions(lo: float, hi: float, length: float, step: float) -> np.ndarray:
    """Left edges ``lo + j*step`` up to the first one whose window reaches ``hi``."""
    j = max(0, math.ceil((hi - lo - length) / step))
    # guard the closed-form count against rounding at the stopping rule
    while j > 0 and lo + (j - 1) * step + length >= hi:
        j -= 1
    while lo + j * step + length < hi:
        j += 1
    return lo + np.arange(j + 1) * step


def level_tokens(values: np.ndarray, length: float, step: float) -> np.ndarray:
    x = window_positions(values.min(), values.max(), length, step)
    inside = (values[None, :] >= x[:, None]) & (values[None, :] <= x[:, None] + length)
    counts = inside.sum(axis=1)
    return counts @ inside


def level_winner(values: np.ndarray, length: float, step: float) -> float:
    tokens = level_tokens(values, length, step)
    best = values[tokens == tokens.max()]
    lo, hi = best.min(), best.max()
    return float(lo) if lo == hi else float((lo + hi) / 2)


def moving_window_levels(values, cfg: MovingWindowConfig = MovingWindowConfig()) -> list[float]:
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("need at least one estimate")
    winners = []
    length, subset = cfg.window_length, v
    for _ in range(cfg.levels):
        w = level_winner(subset, length, min(cfg.step, length))
        winners.append(w)
        nxt = subset[np.abs(subset - w) <= length / 2]
        if nxt.size == 0:
            break
        subset, length = nxt, length / 2
    return winners


def moving_window_estimate(values, cfg: MovingWindowConfig = MovingWindowConfig()) -> float:
    return moving_window_levels(values, cfg)[-1]


def fuse_pulse_train(features, network, cfg: MovingWindowConfig = MovingWindowConfig()) -> PulseTrainEstimate:
    """Predict every pulse with ``network`` and fuse the angles."""
    from .estimator import predict

    X = np.atleast_2d(np.asarray([getattr(f, "values", f) for f in features], dtype=float))
    if X.shape[0] < 1:
        raise ValueError("pulse train is empty")
    angles = np.atleast_1d(predict(network, X))
    return fuse_values(angles, cfg)


def fuse_values(angles, cfg: MovingWindowConfig = MovingWindowConfig()) -> PulseTrainEstimate:
    angles = np.asarray(angles, dtype=float)
    winners = moving_window_levels(angles, cfg)
    return PulseTrainEstimate(angles, cfg, winners[-1], tuple(winners))
