"""Echo feature extraction: endpoint detection, Hamming STFT, ridge masking
and 0.5 kHz band energies (30 per ear, 60 per pulse)."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import signal as sps

from .echo_sim import ChirpParams, EchoRecording, make_chirp

N_BANDS = 30
BAND_LO = 5e3
BAND_WIDTH = 0.5e3


class NoSignalError(ValueError):
    pass


@dataclass(frozen=True)
class EndpointConfig:
    frame: int = 100  # samples (1 ms at 100 kHz)
    threshold: float = 4.0  # multiple of the leading-noise RMS
    consecutive: int = 3
    lead_frames: int = 5
    floor_rel: float = 1e-3  # floor relative to the loudest frame when there is no noise


@dataclass(frozen=True)
class FeatureConfig:
    window: int = 100
    hop: int = 50
    nfft: int = 200
    mask_halfwidth: int = 2
    endpoint: EndpointConfig = EndpointConfig()


@dataclass(frozen=True)
class Spectrogram:
    values: np.ndarray  # (frames, bins) one-sided |X|^2
    df: float
    frame_hop: int
    fs: float
    window: int
    onset: int = 0  # sample index inside the segment where the chirp starts

    def frame_times(self) -> np.ndarray:
        """Chirp time (s) at the centre of every frame."""
        centre = np.arange(self.values.shape[0]) * self.frame_hop + self.window / 2
        return (centre - self.onset) / self.fs

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.values.shape[1]) * self.df


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    norm: str = "none"

    def __post_init__(self):
        if self.values.shape != (2 * N_BANDS,):
            raise ValueError("feature vector must have 60 elements")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite features")


def frame_rms(x: np.ndarray, frame: int) -> np.ndarray:
    n = len(x) // frame
    return np.sqrt(np.mean(x[: n * frame].reshape(n, frame) ** 2, axis=1))


def _runs(mask: np.ndarray):
    """(start, stop) index pairs of True runs."""
    edges = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)))


def detect_endpoints(x, cfg: EndpointConfig = EndpointConfig()) -> tuple[int, int]:
    """Sample bounds of the first echo segment.

    Frame RMS is compared against ``threshold`` times the RMS of the
    leading frames.  The segment opens at the first run of at least
    ``consecutive`` loud frames and closes once a quiet run of the same
    length follows (or at the end of the signal).
    """
    x = np.asarray(x, dtype=float)
    if len(x) < cfg.frame:
        raise ValueError("signal shorter than one detection frame")
    rms = frame_rms(x, cfg.frame)
    lead = rms[: cfg.lead_frames]
    floor = max(float(np.sqrt(np.mean(lead**2))), cfg.floor_rel * float(rms.max()))
    loud = rms > cfg.threshold * floor
    runs = [(a, b) for a, b in _runs(loud) if b - a >= cfg.consecutive]
    if not runs:
        raise NoSignalError("no frame run exceeds the detection threshold")
    start = runs[0][0]
    quiet = [a for a, b in _runs(~loud) if a > start and b - a >= cfg.consecutive]
    stop = quiet[0] if quiet else len(loud)
    return int(start * cfg.frame), int(stop * cfg.frame)


def anchor_onset(x, template, lo: int, hi: int) -> int:
    """Refine the chirp start inside ``[lo, hi)`` by matched filtering.

    The beam filter can remove whole parts of the sweep, so energy
    detection alone may latch onto the middle of the chirp.  The
    cross-correlation peak aligns the surviving part with the template.
    """
    x = np.asarray(x, dtype=float)
    m = len(template)
    lo = max(0, lo - m)
    hi = min(len(x), hi + m)
    seg = x[lo:hi]
    if len(seg) < m:
        seg = np.pad(seg, (0, m - len(seg)))
    corr = sps.correlate(seg, template, mode="valid", method="fft")
    return lo + int(np.argmax(np.abs(corr)))


def spectrogram(segment, fs: float = 100e3, window: int = 100, hop: int = 50, nfft: int = 200, onset: int = 0) -> Spectrogram:
    """Hamming-window STFT power ``|X_n|^2``, one-sided, ``nfft``-point zero padded."""
    x = np.asarray(segment, dtype=float)
    if len(x) < window:
        raise ValueError("segment shorter than one analysis window")
    n_frames = 1 + (len(x) - window) // hop
    idx = np.arange(window)[None, :] + hop * np.arange(n_frames)[:, None]
    w = np.hamming(window)
    X = np.fft.rfft(x[idx] * w, nfft, axis=1)
    return Spectrogram(np.abs(X) ** 2, fs / nfft, hop, fs, window, onset)


def ridge_bins(s: Spectrogram, chirp: ChirpParams) -> np.ndarray:
    """Nominal instantaneous-frequency bin of the chirp at every frame centre."""
    t = np.clip(s.frame_times(), 0.0, chirp.duration)
    return np.rint(chirp.instantaneous_frequency(t) / s.df).astype(int)


def mask_off_ridge(s: Spectrogram, chirp: ChirpParams, halfwidth_bins: int = 2) -> Spectrogram:
    if s.fs != chirp.fs:
        raise ValueError("spectrogram and chirp sampling rates differ")
    centre = ridge_bins(s, chirp)
    bins = np.arange(s.values.shape[1])
    keep = np.abs(bins[None, :] - centre[:, None]) <= halfwidth_bins
    return replace(s, values=np.where(keep, s.values, 0.0))


def band_energies(s: Spectrogram) -> np.ndarray:
    """Energy in 30 bands [5 + 0.5k, 5 + 0.5(k+1)) kHz summed over frames.

    Each FFT bin is treated as a cell of width ``df`` centred on its
    frequency, so band edges that fall on bin centres split that bin's
    energy evenly between neighbours.
    """
    if not np.isclose(s.df, BAND_WIDTH):
        raise ValueError(f"band energies need 0.5 kHz bins, got {s.df} Hz")
    j0 = int(round(BAND_LO / s.df))
    if j0 + N_BANDS >= s.values.shape[1]:
        raise ValueError("band exceeds spectrogram support")
    per_bin = s.values.sum(axis=0)
    return 0.5 * (per_bin[j0:j0 + N_BANDS] + per_bin[j0 + 1:j0 + N_BANDS + 1])


def make_feature_vector(left30, right30, norm: str = "none") -> FeatureVector:
    left30 = np.asarray(left30, dtype=float)
    right30 = np.asarray(right30, dtype=float)
    if left30.shape != (N_BANDS,) or right30.shape != (N_BANDS,):
        raise ValueError("each ear needs exactly 30 band energies")
    v = np.concatenate([left30, right30])
    if norm == "unit-sum":
        total = v.sum()
        if total > 0:
            v = v / total
    elif norm == "log":
        v = np.log10(LOG_EPS + v)
    elif norm != "none":
        raise ValueError(f"unknown normalisation {norm!r}")
    return FeatureVector(v, norm)


LOG_EPS = 1e-12


@dataclass(frozen=True)
class LogZScore:
    """log10(eps + e) followed by per-dimension standardisation.

    Statistics come from the training rows only.
    """

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, raw: np.ndarray) -> "LogZScore":
        logs = np.log10(LOG_EPS + np.asarray(raw, dtype=float))
        std = logs.std(axis=0)
        # rounding leaves a tiny spread on constant columns
        flat = std <= 1e-9 * np.maximum(1.0, np.abs(logs).max(axis=0))
        return cls(logs.mean(axis=0), np.where(flat, 1.0, std))

    def transform(self, raw: np.ndarray) -> np.ndarray:
        return (np.log10(LOG_EPS + np.asarray(raw, dtype=float)) - self.mean) / self.std


def channel_energies(x, chirp: ChirpParams, cfg: FeatureConfig = FeatureConfig(), template=None) -> tuple[np.ndarray, bool]:
    """Band energies of one channel; the flag reports whether energy detection fired."""
    template = make_chirp(chirp) if template is None else template
    m = len(template)
    try:
        lo, hi = detect_endpoints(x, cfg.endpoint)
        detected = True
    except NoSignalError:
        lo, hi, detected = 0, len(x), False
    onset = anchor_onset(x, template, lo, hi)
    pad = cfg.window // 2
    a, b = onset - pad, onset + m + pad
    seg = np.zeros(b - a)
    src_lo, src_hi = max(a, 0), min(b, len(x))
    seg[src_lo - a:src_hi - a] = x[src_lo:src_hi]
    s = spectrogram(seg, chirp.fs, cfg.window, cfg.hop, cfg.nfft, onset=pad)
    return band_energies(mask_off_ridge(s, chirp, cfg.mask_halfwidth)), detected


def recording_features(rec: EchoRecording, chirp: ChirpParams, cfg: FeatureConfig = FeatureConfig(), template=None):
    """Raw (unnormalised) 60-vector and the per-channel detection flags."""
    left, dl = channel_energies(rec.left, chirp, cfg, template)
    right, dr = channel_energies(rec.right, chirp, cfg, template)
    return np.concatenate([left, right]), (dl, dr)
