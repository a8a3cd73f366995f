"""LFM chirp generation and two-channel echo synthesis through the beam model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from . import geometry
from .beam_model import BeamModel, gain_array
from .geometry import DeviceConfig, Direction, PinnaPose, Side

SPEED_OF_SOUND = 343.0
RECORD_WINDOW = 0.05  # seconds per pulse
_FILTER_GUARD = 256  # samples of pre/post room for the zero-phase receive filter


class DelayError(ValueError):
    """Echo does not fit in the record window."""


@dataclass(frozen=True)
class ChirpParams:
    f_start: float = 5e3
    f_end: float = 20e3
    duration: float = 5e-3
    fs: float = 100e3
    amplitude: float = 1.0

    def __post_init__(self):
        nyq = self.fs / 2
        if not (0 < self.f_start < nyq and 0 < self.f_end < nyq):
            raise ValueError("chirp frequencies must lie in (0, fs/2)")
        if self.duration <= 0:
            raise ValueError("duration must be positive")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.fs))

    @property
    def sweep_rate(self) -> float:
        """Hz per second."""
        return (self.f_end - self.f_start) / self.duration

    def instantaneous_frequency(self, t):
        return self.f_start + self.sweep_rate * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class Scene:
    target_direction: Direction
    range: float = 1.5
    target_strength: float = 1.0

    def __post_init__(self):
        if self.range <= 0:
            raise ValueError("range must be positive")


@dataclass(frozen=True)
class NoiseConfig:
    """White receiver noise referenced to an on-axis target.

    The noise floor is fixed so that a unit-strength target at
    ``reference_range`` on the transmitter axis, received with unit gain,
    has ``snr_db_at_boresight``.  ``snr_db_at_boresight = None`` disables noise.
    """

    snr_db_at_boresight: float | None = 20.0
    tx_directivity_exponent: float = 2.0
    seed: int = 0
    reference_range: float = 1.5

    def __post_init__(self):
        if self.tx_directivity_exponent < 0:
            raise ValueError("directivity exponent must be >= 0")


@dataclass(frozen=True)
class Truth:
    direction: Direction
    range: float
    site: int
    pulse: int


@dataclass(frozen=True)
class EchoRecording:
    left: np.ndarray
    right: np.ndarray
    fs: float
    truth: Truth

    def __post_init__(self):
        if len(self.left) != len(self.right):
            raise ValueError("channel lengths differ")


def make_chirp(p: ChirpParams) -> np.ndarray:
    t = np.arange(p.n_samples) / p.fs
    return p.amplitude * np.sin(2 * np.pi * (p.f_start * t + 0.5 * p.sweep_rate * t**2))


def record_length(fs: float, window: float = RECORD_WINDOW) -> int:
    return int(round(window * fs))


def path_delay_samples(scene: Scene, pose: PinnaPose, fs: float, c: float = SPEED_OF_SOUND) -> int:
    """Round-trip delay from the central transmitter to the pinna microphone."""
    u = geometry.to_unit_vector(scene.target_direction)
    # far-field correction: receive leg shortens by the mic offset projected on the target direction
    path = 2 * scene.range - pose.microphone_y * u[1]
    return int(round(fs * path / c))


def tx_attenuation(world: Direction, exponent: float) -> float:
    return max(math.cos(math.radians(world.azimuth)), 0.0) ** exponent


def noise_sigma(chirp: np.ndarray, noise: NoiseConfig) -> float:
    if noise.snr_db_at_boresight is None:
        return 0.0
    p_ref = np.mean(chirp**2) / noise.reference_range**4
    return float(math.sqrt(p_ref / 10 ** (noise.snr_db_at_boresight / 10)))


@lru_cache(maxsize=8)
def _rfft_freqs(n: int, fs: float) -> np.ndarray:
    f = np.fft.rfftfreq(n, 1 / fs)
    f[0] = f[1]  # gain is undefined at DC; the chirp carries no DC energy anyway
    return f


def _receive_filter(chirp: np.ndarray, fs: float, beam: BeamModel, local: Direction, mirror: bool):
    n = 1 << int(math.ceil(math.log2(len(chirp) + 2 * _FILTER_GUARD)))
    buf = np.zeros(n)
    buf[_FILTER_GUARD:_FILTER_GUARD + len(chirp)] = chirp
    az = -local.azimuth if mirror else local.azimuth
    g = gain_array(beam, _rfft_freqs(n, fs), az, local.elevation)
    return np.fft.irfft(np.fft.rfft(buf) * g, n)


def clean_echo(
    chirp: np.ndarray,
    fs: float,
    scene: Scene,
    beam: BeamModel,
    device: DeviceConfig,
    tx_exponent: float,
    n_record: int | None = None,
    c: float = SPEED_OF_SOUND,
) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free left/right echoes on the record grid."""
    n_record = n_record or record_length(fs)
    scale = tx_attenuation(scene.target_direction, tx_exponent) * scene.target_strength / scene.range**2
    chans = []
    for pose in device.poses:
        local = geometry.local_direction(pose, scene.target_direction)
        shaped = _receive_filter(chirp, fs, beam, local, mirror=pose.side is Side.RIGHT)
        delay = path_delay_samples(scene, pose, fs, c)
        if delay + len(chirp) > n_record:
            raise DelayError(f"echo at sample {delay} does not fit a {n_record}-sample record")
        out = np.zeros(n_record)
        start = delay - _FILTER_GUARD
        lo, hi = max(start, 0), min(start + len(shaped), n_record)
        out[lo:hi] = shaped[lo - start:hi - start]
        chans.append(out * scale)
    return chans[0], chans[1]


def synthesize_echo(
    chirp_params: ChirpParams,
    scene: Scene,
    beam: BeamModel,
    device: DeviceConfig,
    noise: NoiseConfig,
    site: int = 0,
    pulse: int = 0,
    rng: np.random.Generator | None = None,
) -> EchoRecording:
    chirp = make_chirp(chirp_params)
    fs = chirp_params.fs
    left, right = clean_echo(chirp, fs, scene, beam, device, noise.tx_directivity_exponent)
    sigma = noise_sigma(chirp, noise)
    if sigma > 0:
        rng = rng or np.random.default_rng(noise.seed)
        left = left + sigma * rng.standard_normal(len(left))
        right = right + sigma * rng.standard_normal(len(right))
    return EchoRecording(left, right, fs, Truth(scene.target_direction, scene.range, site, pulse))


@dataclass(frozen=True)
class Site:
    range: float = 1.5
    offset: Direction = field(default_factory=lambda: Direction(0.0, 0.0))
    bearing: float = 0.0  # placement around the target; bookkeeping only in free field


def default_sites(n: int = 8, range_m: float = 1.5) -> list[Site]:
    return [Site(range_m, Direction(0.0, 0.0), 360.0 * i / n) for i in range(n)]


def record_rng(seed: int, site: int, direction: int, pulse: int) -> np.random.Generator:
    """Noise stream for one record, independent of generation order."""
    return np.random.default_rng(np.random.SeedSequence([seed, site, direction, pulse]))


def _offset_direction(d: Direction, off: Direction) -> Direction:
    return Direction(float(geometry.wrap_azimuth(d.azimuth + off.azimuth)), d.elevation + off.elevation)


@dataclass
class Dataset:
    """Lazily synthesised echo records ordered by (site, direction, pulse)."""

    grid: Sequence[Direction]
    sites: Sequence[Site]
    pulses_per_cell: int
    chirp: ChirpParams
    beam: BeamModel
    device: DeviceConfig
    noise: NoiseConfig
    target_strength: float = 1.0

    def __post_init__(self):
        if self.pulses_per_cell < 1:
            raise ValueError("pulses_per_cell must be >= 1")
        if not self.grid or not self.sites:
            raise ValueError("grid and sites must be nonempty")
        self.grid = list(self.grid)
        self.sites = list(self.sites)
        self._chirp = make_chirp(self.chirp)
        self._sigma = noise_sigma(self._chirp, self.noise)
        self._cache_key = None
        self._cache_val = None

    def __len__(self) -> int:
        return len(self.sites) * len(self.grid) * self.pulses_per_cell

    def index(self, i: int) -> tuple[int, int, int]:
        if not 0 <= i < len(self):
            raise IndexError(i)
        cell, pulse = divmod(i, self.pulses_per_cell)
        site, direction = divmod(cell, len(self.grid))
        return site, direction, pulse

    def scene(self, site: int, direction: int) -> Scene:
        s = self.sites[site]
        return Scene(_offset_direction(self.grid[direction], s.offset), s.range, self.target_strength)

    def clean(self, site: int, direction: int) -> tuple[np.ndarray, np.ndarray]:
        key = (site, direction)
        if key != self._cache_key:
            self._cache_val = clean_echo(
                self._chirp, self.chirp.fs, self.scene(site, direction), self.beam, self.device,
                self.noise.tx_directivity_exponent,
            )
            self._cache_key = key
        return self._cache_val

    def __getitem__(self, i: int) -> EchoRecording:
        site, direction, pulse = self.index(i)
        left, right = self.clean(site, direction)
        if self._sigma > 0:
            rng = record_rng(self.noise.seed, site, direction, pulse)
            left = left + self._sigma * rng.standard_normal(len(left))
            right = right + self._sigma * rng.standard_normal(len(right))
        s = self.sites[site]
        return EchoRecording(left, right, self.chirp.fs, Truth(self.grid[direction], s.range, site, pulse))

    def __iter__(self) -> Iterator[EchoRecording]:
        for i in range(len(self)):
            yield self[i]

    @property
    def manifest(self) -> dict:
        return {
            "chirp": asdict(self.chirp),
            "beam": asdict(self.beam),
            "device": asdict(self.device),
            "noise": asdict(self.noise),
            "sites": [asdict(s) for s in self.sites],
            "grid": [asdict(d) for d in self.grid],
            "pulses_per_cell": self.pulses_per_cell,
            "target_strength": self.target_strength,
        }


def generate_dataset(
    grid: Sequence[Direction],
    sites: Sequence[Site],
    pulses_per_cell: int,
    chirp: ChirpParams | None = None,
    beam: BeamModel | None = None,
    device: DeviceConfig | None = None,
    noise: NoiseConfig | None = None,
    target_strength: float = 1.0,
) -> Dataset:
    return Dataset(
        grid, sites, pulses_per_cell,
        chirp or ChirpParams(), beam or BeamModel(), device or geometry.parallel_device(),
        noise or NoiseConfig(), target_strength,
    )
