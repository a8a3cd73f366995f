"""Kirchhoff far-field projection of a planar aperture and lobe analytics.

The aperture lies in the x = 0 plane with its normal along +x, so the
far-field boresight coincides with the device boresight of
:mod:`batpinna.geometry`.  Cell (i, j) of the grid sits at
``z = (i - (rows-1)/2) * spacing`` and ``y = (j - (cols-1)/2) * spacing``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .geometry import Direction, angles_to_vectors

SPEED_OF_SOUND = 343.0  # m/s, air at 20 C
MIN_CELLS_PER_WAVELENGTH = 5.0

OBLIQUITY = {
    # Kirchhoff's (1 + cos psi) / 2
    "kirchhoff": lambda cos_psi: 0.5 * (1.0 + cos_psi),
    # baffled piston (Rayleigh); no angular weighting
    "none": lambda cos_psi: np.ones_like(cos_psi),
}


class SamplingError(ValueError):
    """Aperture too coarsely sampled for its frequency."""


class NoSideLobeError(ValueError):
    pass


@dataclass(frozen=True)
class ApertureField:
    grid: np.ndarray
    spacing: float
    frequency: float
    c: float = SPEED_OF_SOUND

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=complex)
        if g.ndim != 2 or g.size == 0:
            raise ValueError("aperture grid must be a nonempty 2D array")
        object.__setattr__(self, "grid", g)
        if self.spacing <= 0:
            raise SamplingError("spacing must be positive")
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")
        if self.wavelength / self.spacing < MIN_CELLS_PER_WAVELENGTH:
            raise SamplingError(
                f"{self.wavelength / self.spacing:.2f} cells per wavelength "
                f"(< {MIN_CELLS_PER_WAVELENGTH}) at {self.frequency:g} Hz"
            )

    @property
    def wavelength(self) -> float:
        return self.c / self.frequency

    @property
    def k(self) -> float:
        return 2 * math.pi * self.frequency / self.c

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell centre coordinates ``(z_rows, y_cols)`` in metres."""
        rows, cols = self.grid.shape
        z = (np.arange(rows) - (rows - 1) / 2) * self.spacing
        y = (np.arange(cols) - (cols - 1) / 2) * self.spacing
        return z, y


@dataclass(frozen=True)
class FarFieldPattern:
    azimuths: np.ndarray
    elevations: np.ndarray
    gains: np.ndarray  # shape (len(elevations), len(azimuths))
    frequency: float

    def __post_init__(self):
        if self.gains.shape != (len(self.elevations), len(self.azimuths)):
            raise ValueError("gain matrix does not match the direction lattice")
        if not np.all(np.isfinite(self.gains)):
            raise FloatingPointError("non-finite far-field gains")

    @property
    def directions(self) -> list[Direction]:
        return [Direction(float(a), float(e)) for e in self.elevations for a in self.azimuths]

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.gains)


@dataclass(frozen=True)
class LobeReport:
    main_direction: Direction
    main_hpbw: float
    side_direction: Direction
    side_level_db: float
    energy_ratio: float


def kirchhoff_far_field(
    a: ApertureField,
    azimuths,
    elevations,
    obliquity: str = "kirchhoff",
    normalize: bool = True,
) -> FarFieldPattern:
    """Project the aperture field onto a direction lattice.

    F(r) = sum_cells A * exp(i k r.p) * w(cos psi) * dA, with psi the angle
    between r and the aperture normal.  With ``normalize`` the result is
    scaled to unit peak magnitude over the lattice.
    """
    az = np.atleast_1d(np.asarray(azimuths, dtype=float))
    el = np.atleast_1d(np.asarray(elevations, dtype=float))
    if az.size == 0 or el.size == 0:
        raise ValueError("empty direction lattice")
    try:
        weight = OBLIQUITY[obliquity]
    except KeyError:
        raise ValueError(f"unknown obliquity {obliquity!r}") from None

    z, y = a.coordinates()
    k = a.k
    area = a.spacing**2
    r = angles_to_vectors(az[None, :], el[:, None])  # (n_el, n_az, 3)
    out = np.empty((el.size, az.size), dtype=complex)
    # separable kernel: exp(ik(ry*y + rz*z)) = exp(ik rz z) exp(ik ry y)
    for i in range(el.size):
        rz = r[i, 0, 2]
        ez = np.exp(1j * k * rz * z)
        ey = np.exp(1j * k * np.outer(y, r[i, :, 1]))
        out[i] = (ez @ a.grid) @ ey
    out *= weight(r[..., 0]) * area
    if normalize:
        peak = np.max(np.abs(out))
        if not peak > 0:
            raise FloatingPointError("far field vanishes on the lattice")
        out /= peak
    return FarFieldPattern(az, el, out, a.frequency)


def _crossing(x0, x1, y0, y1, level):
    return x0 + (level - y0) * (x1 - x0) / (y1 - y0)


def half_power_beamwidth(p: FarFieldPattern) -> float:
    """-3 dB width of the global peak measured along its elevation cut."""
    mag = p.magnitude
    i, j = np.unravel_index(np.argmax(mag), mag.shape)
    cut = mag[:, j]
    el = p.elevations
    level = cut[i] / math.sqrt(2)
    lo = i
    while lo > 0 and cut[lo - 1] >= level:
        lo -= 1
    hi = i
    while hi < len(cut) - 1 and cut[hi + 1] >= level:
        hi += 1
    if lo == 0 or hi == len(cut) - 1:
        raise ValueError("main lobe is not closed within the elevation lattice")
    lower = _crossing(el[lo - 1], el[lo], cut[lo - 1], cut[lo], level)
    upper = _crossing(el[hi], el[hi + 1], cut[hi], cut[hi + 1], level)
    return float(upper - lower)


def _region(mask, seed):
    labels, _ = ndimage.label(mask, structure=np.ones((3, 3)))
    return labels == labels[seed]


def analyze_lobes(p: FarFieldPattern) -> LobeReport:
    mag = p.magnitude
    flat = np.argmax(mag)
    main = np.unravel_index(flat, mag.shape)
    if np.count_nonzero(mag == mag[main]) > 1:
        raise ValueError("pattern has no unique global maximum")
    peak = mag[main]
    main_region = _region(mag >= peak / math.sqrt(2), main)

    neigh = ndimage.maximum_filter(mag, size=3, mode="constant", cval=-np.inf)
    local_max = (mag >= neigh) & ~main_region
    # a plateau point equal to every neighbour is not a lobe
    lowest = ndimage.minimum_filter(mag, size=3, mode="nearest")
    local_max &= mag > lowest
    if not local_max.any():
        raise NoSideLobeError("no secondary local maximum outside the main lobe")
    cand = np.where(local_max, mag, -np.inf)
    side = np.unravel_index(np.argmax(cand), mag.shape)
    side_region = _region(mag >= mag[side] / math.sqrt(2), side) & ~main_region

    e_main = float(np.sum(mag[main_region] ** 2))
    e_side = float(np.sum(mag[side_region] ** 2))
    return LobeReport(
        main_direction=Direction(float(p.azimuths[main[1]]), float(p.elevations[main[0]])),
        main_hpbw=half_power_beamwidth(p),
        side_direction=Direction(float(p.azimuths[side[1]]), float(p.elevations[side[0]])),
        side_level_db=float(20 * np.log10(mag[side] / peak)),
        energy_ratio=e_side / e_main,
    )


def elevation_cut(p: FarFieldPattern) -> tuple[np.ndarray, np.ndarray]:
    """Elevations and magnitudes along the column through the global peak."""
    mag = p.magnitude
    _, j = np.unravel_index(np.argmax(mag), mag.shape)
    return p.elevations.copy(), mag[:, j]


def first_null_elevation(p: FarFieldPattern) -> float:
    """Elevation of the first magnitude minimum above the main peak on the cut."""
    el, cut = elevation_cut(p)
    i = int(np.argmax(cut))
    while i + 1 < len(cut) and cut[i + 1] <= cut[i]:
        i += 1
    if i + 1 >= len(cut) or i == 0:
        return float(el[i])
    # parabolic refinement through the three lattice points around the minimum
    y0, y1, y2 = cut[i - 1], cut[i], cut[i + 1]
    denom = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / denom if denom > 0 else 0.0
    return float(el[i] + shift * (el[i + 1] - el[i]))


def sweep_lobe_track(apertures, azimuths, elevations, obliquity: str = "kirchhoff"):
    """Lobe report per aperture, for apertures ordered by ascending frequency."""
    apertures = list(apertures)
    if len(apertures) < 2:
        raise ValueError("a lobe track needs at least two frequencies")
    freqs = [a.frequency for a in apertures]
    if any(f1 <= f0 for f0, f1 in zip(freqs, freqs[1:])):
        raise ValueError("aperture frequencies must be strictly ascending")
    return [
        (a.frequency, analyze_lobes(kirchhoff_far_field(a, azimuths, elevations, obliquity)))
        for a in apertures
    ]


# --- synthetic apertures ----------------------------------------------------


def disc_mask(cells_per_radius: int, supersample: int = 8) -> np.ndarray:
    """Fractional coverage of a centred disc on a square grid (radius in cells)."""
    n = 2 * cells_per_radius + 1
    sub = (np.arange(supersample) + 0.5) / supersample - 0.5
    c = np.arange(n) - cells_per_radius
    fine = (c[:, None] + sub[None, :]).ravel()
    inside = fine[:, None] ** 2 + fine[None, :] ** 2 <= cells_per_radius**2
    return inside.reshape(n, supersample, n, supersample).mean(axis=(1, 3))


def circular_piston(ka: float, frequency: float = 40e3, cells_per_radius: int = 40, c: float = SPEED_OF_SOUND) -> ApertureField:
    """Uniform-velocity disc of radius ``a = ka / k``."""
    k = 2 * math.pi * frequency / c
    radius = ka / k
    return ApertureField(disc_mask(cells_per_radius).astype(complex), radius / cells_per_radius, frequency, c)


def steered_sidelobe_aperture(
    frequency: float,
    side_elevation: float,
    side_amplitude: float = 0.6,
    ka: float = 10.0,
    cells_per_radius: int = 24,
    c: float = SPEED_OF_SOUND,
) -> ApertureField:
    """Disc carrying a broadside component plus a phase ramp steered to ``side_elevation``."""
    base = circular_piston(ka, frequency, cells_per_radius, c)
    z, _ = base.coordinates()
    ramp = np.exp(-1j * base.k * math.sin(math.radians(side_elevation)) * z)[:, None]
    return ApertureField(base.grid * (1.0 + side_amplitude * ramp), base.spacing, frequency, c)


# --- CSV persistence --------------------------------------------------------


def _complex_rows(m: np.ndarray) -> list[str]:
    rows = []
    for row in m:
        pairs = np.column_stack([row.real, row.imag]).ravel()
        rows.append(",".join(repr(float(v)) for v in pairs))
    return rows


def _parse_rows(lines) -> np.ndarray:
    vals = [np.array([float(t) for t in ln.split(",")]) for ln in lines if ln.strip()]
    arr = np.vstack(vals)
    return arr[:, 0::2] + 1j * arr[:, 1::2]


def _meta_line(meta: dict) -> str:
    return ",".join(f"{k}={v}" for k, v in meta.items())


def _parse_meta(line: str) -> dict[str, str]:
    return dict(item.split("=", 1) for item in line.strip().split(","))


def save_aperture_csv(a: ApertureField, path) -> None:
    meta = {"frequency": repr(a.frequency), "spacing": repr(a.spacing), "c": repr(a.c),
            "rows": a.grid.shape[0], "cols": a.grid.shape[1]}
    Path(path).write_text("\n".join([_meta_line(meta), *_complex_rows(a.grid)]) + "\n")


def load_aperture_csv(path) -> ApertureField:
    first, *rest = Path(path).read_text().splitlines()
    meta = _parse_meta(first)
    grid = _parse_rows(rest)
    if grid.shape != (int(meta["rows"]), int(meta["cols"])):
        raise ValueError("aperture CSV shape does not match its header")
    return ApertureField(grid, float(meta["spacing"]), float(meta["frequency"]), float(meta["c"]))


def save_pattern_csv(p: FarFieldPattern, path, extra: dict | None = None) -> None:
    meta = {"frequency": repr(float(p.frequency)),
            "azimuths": ";".join(repr(float(v)) for v in p.azimuths),
            "elevations": ";".join(repr(float(v)) for v in p.elevations)}
    if extra:
        meta.update(extra)
    Path(path).write_text("\n".join([_meta_line(meta), *_complex_rows(p.gains)]) + "\n")


def load_pattern_csv(path) -> FarFieldPattern:
    first, *rest = Path(path).read_text().splitlines()
    meta = _parse_meta(first)
    az = np.array([float(v) for v in meta["azimuths"].split(";")])
    el = np.array([float(v) for v in meta["elevations"].split(";")])
    return FarFieldPattern(az, el, _parse_rows(rest), float(meta["frequency"]))
