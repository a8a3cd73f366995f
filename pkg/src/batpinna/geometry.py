"""Direction conventions, pinna poses and world-to-pinna transforms.

Frame: x forward (device boresight), y left, z up.  Azimuth is measured
from +x toward +y, elevation from the xy-plane toward +z, both in degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


@dataclass(frozen=True)
class Direction:
    azimuth: float
    elevation: float

    def __post_init__(self):
        if not (-180.0 <= self.azimuth < 180.0):
            raise ValueError(f"azimuth {self.azimuth} outside [-180, 180)")
        if not (-90.0 <= self.elevation <= 90.0):
            raise ValueError(f"elevation {self.elevation} outside [-90, 90]")

    def __iter__(self):
        yield self.azimuth
        yield self.elevation


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"


class Mode(str, Enum):
    PARALLEL = "parallel"
    ORTHOGONAL = "orthogonal"


@dataclass(frozen=True)
class PinnaPose:
    """Orientation of one pinna relative to the device frame.

    ``forward_tilt`` pitches the boresight upward; ``roll`` then turns the
    pinna about its own (tilted) boresight, positive values swinging the
    pinna's top toward +y.  ``baseline_offset`` is the lateral distance of
    the microphone from the device centre.
    """

    forward_tilt: float = 0.0
    roll: float = 0.0
    side: Side = Side.LEFT
    baseline_offset: float = 0.025

    def __post_init__(self):
        if not (0.0 <= self.forward_tilt <= 90.0):
            raise ValueError("forward_tilt must lie in [0, 90]")
        if self.baseline_offset < 0:
            raise ValueError("baseline_offset must be >= 0")
        object.__setattr__(self, "side", Side(self.side))

    @property
    def microphone_y(self) -> float:
        return self.baseline_offset if self.side is Side.LEFT else -self.baseline_offset


@dataclass(frozen=True)
class DeviceConfig:
    left: PinnaPose
    right: PinnaPose
    mode: Mode = Mode.PARALLEL

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.left.side is not Side.LEFT or self.right.side is not Side.RIGHT:
            raise ValueError("left/right poses must carry matching sides")
        if self.mode is Mode.PARALLEL and (self.left.roll != 0 or self.right.roll != 0):
            raise ValueError("parallel mode requires zero roll on both pinnae")
        if self.mode is Mode.ORTHOGONAL and abs(self.left.roll - self.right.roll) != 90:
            raise ValueError("orthogonal mode requires a 90 degree roll difference")

    @property
    def poses(self) -> tuple[PinnaPose, PinnaPose]:
        return self.left, self.right


def parallel_device(forward_tilt: float = 0.0, baseline_offset: float = 0.025) -> DeviceConfig:
    return DeviceConfig(
        PinnaPose(forward_tilt, 0.0, Side.LEFT, baseline_offset),
        PinnaPose(forward_tilt, 0.0, Side.RIGHT, baseline_offset),
        Mode.PARALLEL,
    )


def orthogonal_device(forward_tilt: float = 40.0, baseline_offset: float = 0.025) -> DeviceConfig:
    """Left pinna upright, right pinna rolled 90 degrees about its boresight."""
    return DeviceConfig(
        PinnaPose(forward_tilt, 0.0, Side.LEFT, baseline_offset),
        PinnaPose(forward_tilt, 90.0, Side.RIGHT, baseline_offset),
        Mode.ORTHOGONAL,
    )


def wrap_azimuth(az):
    """Map azimuth(s) into [-180, 180)."""
    return (np.asarray(az, dtype=float) + 180.0) % 360.0 - 180.0


def angles_to_vectors(az, el) -> np.ndarray:
    """Vectorised direction -> unit vector; returns shape ``(..., 3)``."""
    az, el = np.broadcast_arrays(np.radians(np.asarray(az, dtype=float)), np.radians(np.asarray(el, dtype=float)))
    ce = np.cos(el)
    return np.stack([ce * np.cos(az), ce * np.sin(az), np.sin(el)], axis=-1)


def vectors_to_angles(v) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(v, dtype=float)
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    el = np.degrees(np.arctan2(z, np.hypot(x, y)))
    az = wrap_azimuth(np.degrees(np.arctan2(y, x)))
    return az, el


def to_unit_vector(d: Direction) -> np.ndarray:
    return angles_to_vectors(d.azimuth, d.elevation)


def from_unit_vector(v) -> Direction:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero vector has no direction")
    az, el = vectors_to_angles(v / n)
    return Direction(float(az), float(el))


def pitch_matrix(deg: float) -> np.ndarray:
    """Rotation carrying +x toward +z by ``deg`` (about the y axis)."""
    t = math.radians(deg)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def roll_matrix(deg: float) -> np.ndarray:
    """Rotation about +x carrying +z toward +y by ``deg``."""
    t = math.radians(deg)
    c, s = math.cos(t), math.sin(t)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])


def pose_matrix(pose: PinnaPose) -> np.ndarray:
    """World -> pinna-local rotation: undo the tilt, then undo the roll."""
    return roll_matrix(-pose.roll) @ pitch_matrix(-pose.forward_tilt)


def local_vectors(pose: PinnaPose, v) -> np.ndarray:
    return np.asarray(v, dtype=float) @ pose_matrix(pose).T


def local_angles(pose: PinnaPose, az, el) -> tuple[np.ndarray, np.ndarray]:
    return vectors_to_angles(local_vectors(pose, angles_to_vectors(az, el)))


def local_direction(pose: PinnaPose, world: Direction) -> Direction:
    az, el = local_angles(pose, world.azimuth, world.elevation)
    return Direction(float(az), float(el))


def angular_distance(az1, el1, az2, el2) -> np.ndarray:
    """Great-circle separation in degrees (broadcasting)."""
    u = angles_to_vectors(az1, el1)
    w = angles_to_vectors(az2, el2)
    # atan2 form stays accurate near 0 and 180 degrees
    cross = np.linalg.norm(np.cross(u, w), axis=-1)
    dot = np.sum(u * w, axis=-1)
    return np.degrees(np.arctan2(cross, dot))


def axis_values(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive-start lattice ``lo, lo+step, ...``; values beyond ``hi`` are dropped."""
    if step <= 0:
        raise ValueError("step must be positive")
    if lo > hi:
        raise ValueError(f"empty range: min {lo} > max {hi}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def grid_directions(az_min, az_max, az_step, el_min, el_max, el_step) -> list[Direction]:
    """Row-major lattice (elevation outer, azimuth inner)."""
    azs = axis_values(az_min, az_max, az_step)
    els = axis_values(el_min, el_max, el_step)
    return [Direction(float(a), float(e)) for e in els for a in azs]


def grid_shape(az_min, az_max, az_step, el_min, el_max, el_step) -> tuple[int, int]:
    return (len(axis_values(el_min, el_max, el_step)), len(axis_values(az_min, az_max, az_step)))
