"""Parametric binaural gain surface with a frequency-scanned sidelobe.

The receive gain of one pinna is the sum of a Gaussian main lobe and a
Gaussian sidelobe whose elevation centre moves linearly with frequency
inside ``scan_band``::

    mu(f) = scan_intercept + scan_slope * f_kHz

The sidelobe azimuth is frequency independent.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .geometry import Direction, angular_distance
from ._kv import read_kv, write_kv


@dataclass(frozen=True)
class BeamModel:
    main_center: Direction = field(default_factory=lambda: Direction(0.0, 0.0))
    main_width: float = 10.0
    main_gain: float = 1.0
    side_width_el: float = 6.0
    side_width_az: float = 12.0
    side_gain: float = 0.7
    scan_band: tuple[float, float] = (10e3, 20e3)
    scan_intercept: float = 100.0  # degrees
    scan_slope: float = -4.0  # degrees per kHz
    side_azimuth_center: float = 0.0

    def __post_init__(self):
        f_lo, f_hi = self.scan_band
        if not f_lo < f_hi:
            raise ValueError("scan_band must satisfy f_lo < f_hi")
        if min(self.main_width, self.side_width_el, self.side_width_az) <= 0:
            raise ValueError("lobe widths must be positive")
        if self.main_gain <= 0 or self.side_gain < 0:
            raise ValueError("gains must be positive")
        if self.scan_slope == 0:
            raise ValueError("scan_slope must be nonzero")
        for f in (f_lo, f_hi):
            if abs(self.sidelobe_elevation(f)) > 90:
                raise ValueError("scan map leaves [-90, 90] inside scan_band")

    def sidelobe_elevation(self, f):
        """Sidelobe elevation centre (degrees) at frequency ``f`` in Hz."""
        return self.scan_intercept + self.scan_slope * (np.asarray(f, dtype=float) / 1e3)

    def with_elevation_offset(self, offset: float) -> "BeamModel":
        """Same lobes re-expressed in a frame whose elevations are shifted by ``offset``."""
        mc = Direction(self.main_center.azimuth, self.main_center.elevation + offset)
        return dataclasses.replace(self, main_center=mc, scan_intercept=self.scan_intercept + offset)

    def save(self, path) -> None:
        d = dataclasses.asdict(self)
        flat = {
            "main_center_azimuth": self.main_center.azimuth,
            "main_center_elevation": self.main_center.elevation,
            "scan_band_lo": self.scan_band[0],
            "scan_band_hi": self.scan_band[1],
        }
        for k, v in d.items():
            if k not in ("main_center", "scan_band"):
                flat[k] = v
        write_kv(path, flat)

    @classmethod
    def load(cls, path) -> "BeamModel":
        return cls.from_mapping(read_kv(path))

    @classmethod
    def from_mapping(cls, kv: dict) -> "BeamModel":
        kv = {k: float(v) for k, v in kv.items()}
        base = cls()
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name in ("main_center", "scan_band"):
                continue
            kwargs[f.name] = kv.pop(f.name, getattr(base, f.name))
        kwargs["main_center"] = Direction(
            kv.pop("main_center_azimuth", base.main_center.azimuth),
            kv.pop("main_center_elevation", base.main_center.elevation),
        )
        kwargs["scan_band"] = (kv.pop("scan_band_lo", base.scan_band[0]), kv.pop("scan_band_hi", base.scan_band[1]))
        if kv:
            raise KeyError(f"unknown beam model keys: {sorted(kv)}")
        return cls(**kwargs)


def gain_array(m: BeamModel, f, az, el) -> np.ndarray:
    """Broadcasting gain evaluation over frequencies (Hz) and local angles (degrees)."""
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequency must be positive")
    az = np.asarray(az, dtype=float)
    el = np.asarray(el, dtype=float)
    d = angular_distance(az, el, m.main_center.azimuth, m.main_center.elevation)
    main = m.main_gain * np.exp(-0.5 * (d / m.main_width) ** 2)
    f_lo, f_hi = m.scan_band
    in_band = (f >= f_lo) & (f <= f_hi)
    mu = m.sidelobe_elevation(f)
    side = m.side_gain * np.exp(
        -0.5 * ((el - mu) / m.side_width_el) ** 2
        - 0.5 * ((az - m.side_azimuth_center) / m.side_width_az) ** 2
    )
    g = main + np.where(in_band, side, 0.0)
    # keep strictly positive far from both lobes
    return np.maximum(g, np.finfo(float).tiny)


def gain(m: BeamModel, f: float, local: Direction) -> float:
    return float(gain_array(m, f, local.azimuth, local.elevation))


def sidelobe_term(m: BeamModel, f, az, el) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    mu = m.sidelobe_elevation(f)
    return m.side_gain * np.exp(
        -0.5 * ((np.asarray(el) - mu) / m.side_width_el) ** 2
        - 0.5 * ((np.asarray(az) - m.side_azimuth_center) / m.side_width_az) ** 2
    )


def frequency_response(m: BeamModel, local: Direction, band, df: float, fs: float = 100e3):
    """Gains sampled at ``f_lo, f_lo + df, ...`` up to ``f_hi``.

    Returns ``(freqs, gains)``.
    """
    f_lo, f_hi = band
    if df <= 0:
        raise ValueError("df must be positive")
    if not (0 < f_lo and f_hi < fs / 2):
        raise ValueError("band must lie inside (0, fs/2)")
    if f_hi < f_lo:
        raise ValueError("empty band")
    n = int(np.floor((f_hi - f_lo) / df + 1e-9)) + 1
    freqs = f_lo + df * np.arange(n)
    return freqs, gain_array(m, freqs, local.azimuth, local.elevation)


def peak_frequency(m: BeamModel, local: Direction, band, df: float, fs: float = 100e3) -> float:
    freqs, g = frequency_response(m, local, band, df, fs)
    return float(freqs[int(np.argmax(g))])


def calibrate_from_track(track, base: BeamModel | None = None) -> tuple[BeamModel, float]:
    """Least-squares affine fit of sidelobe elevation against frequency.

    ``track`` is a sequence of ``(frequency_hz, LobeReport)`` pairs, as
    produced by :func:`batpinna.farfield.sweep_lobe_track`.  Returns the
    calibrated model and the residual RMS in degrees.
    """
    if len(track) < 2:
        raise ValueError("need at least two track points")
    f_khz = np.array([f for f, _ in track], dtype=float) / 1e3
    el = np.array([r.side_direction.elevation for _, r in track], dtype=float)
    az = np.array([r.side_direction.azimuth for _, r in track], dtype=float)
    if np.ptp(f_khz) == 0:
        raise ValueError("singular fit: all frequencies equal")
    A = np.column_stack([np.ones_like(f_khz), f_khz])
    (a, b), *_ = np.linalg.lstsq(A, el, rcond=None)
    rms = float(np.sqrt(np.mean((A @ [a, b] - el) ** 2)))
    base = base or BeamModel()
    model = dataclasses.replace(
        base,
        scan_band=(float(f_khz.min() * 1e3), float(f_khz.max() * 1e3)),
        scan_intercept=float(a),
        scan_slope=float(b),
        side_azimuth_center=float(np.mean(az)),
    )
    return model, rms
