"""Acoustic frontend: WAV IO, duration normalization, log-Mel features, noise.

All features are 80-band log-Mel energies from 25 ms Hamming windows with a
10 ms shift, natural log with a 1e-10 floor. Mean normalization over time is
a separate step so callers control where it happens.
"""

from __future__ import annotations

import math
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class AudioError(ValueError):
    """Raised for unreadable audio or invalid frontend parameters."""


@dataclass
class Waveform:
    """Mono waveform, float64 samples in [-1, 1], with its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise AudioError(f"expected mono 1-D samples, got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise AudioError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise AudioError("waveform contains non-finite samples")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


def read_wav(path: str | Path) -> Waveform:
    """Read a mono 16-bit PCM WAV file."""
    try:
        with wave.open(str(path), "rb") as fh:
            n_channels = fh.getnchannels()
            sampwidth = fh.getsampwidth()
            rate = fh.getframerate()
            n_frames = fh.getnframes()
            raw = fh.readframes(n_frames)
    except (wave.Error, OSError, EOFError) as exc:
        raise AudioError(f"cannot read {path}: {exc}") from exc
    if sampwidth != 2:
        raise AudioError(f"{path}: expected 16-bit PCM, got {8 * sampwidth}-bit")
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if n_channels != 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    return Waveform(samples=data, sample_rate=rate)


def write_wav(path: str | Path, waveform: Waveform) -> None:
    """Write a mono 16-bit PCM WAV file, clipping samples to [-1, 1]."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    clipped = np.clip(waveform.samples, -1.0, 1.0)
    pcm = (clipped * 32767.0).round().astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(waveform.sample_rate)
        fh.writeframes(pcm.tobytes())


def crop_or_pad(
    waveform: Waveform,
    target_s: float = 2.0,
    rng: np.random.Generator | None = None,
) -> Waveform:
    """Return a waveform of exactly ``target_s`` seconds.

    Longer inputs are cropped to a random contiguous window (rng required
    for a random start; without one the crop starts at 0). Shorter inputs
    are tiled cyclically. Inputs already at the target come back unchanged.
    """
    if target_s <= 0:
        raise AudioError(f"target_s must be positive, got {target_s}")
    target_n = int(round(target_s * waveform.sample_rate))
    n = len(waveform.samples)
    if n == 0:
        raise AudioError("cannot crop or pad an empty waveform")
    if n == target_n:
        return waveform
    if n > target_n:
        start = 0 if rng is None else int(rng.integers(0, n - target_n + 1))
        out = waveform.samples[start : start + target_n]
    else:
        reps = math.ceil(target_n / n)
        out = np.tile(waveform.samples, reps)[:target_n]
    return Waveform(samples=out.copy(), sample_rate=waveform.sample_rate)


def _hz_to_mel(hz: np.ndarray | float) -> np.ndarray | float:
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def _mel_to_hz(mel: np.ndarray | float) -> np.ndarray | float:
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular mel filterbank, shape [n_mels, n_fft // 2 + 1]."""
    if n_mels < 1:
        raise AudioError(f"n_mels must be >= 1, got {n_mels}")
    f_max = sample_rate / 2.0
    mel_points = np.linspace(_hz_to_mel(0.0), _hz_to_mel(f_max), n_mels + 2)
    hz_points = np.asarray(_mel_to_hz(mel_points))
    bin_freqs = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    fbank = np.zeros((n_mels, len(bin_freqs)), dtype=np.float64)
    for m in range(n_mels):
        left, center, right = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        rising = (bin_freqs - left) / (center - left)
        falling = (right - bin_freqs) / (right - center)
        fbank[m] = np.maximum(0.0, np.minimum(rising, falling))
    return fbank


@dataclass
class LogMelConfig:
    n_mels: int = 80
    frame_length_ms: float = 25.0
    frame_shift_ms: float = 10.0
    n_fft: int = 512
    floor: float = 1e-10


def log_mel(waveform: Waveform, config: LogMelConfig | None = None) -> np.ndarray:
    """Log-Mel energies of shape [n_mels, T].

    Frames are contiguous ``frame_length_ms`` windows every ``frame_shift_ms``
    with a Hamming window; T = 1 + floor((N - frame_len) / shift). Energies
    are floored at ``config.floor`` before the natural log, so an all-zero
    input yields a constant log(floor) feature map.
    """
    cfg = config or LogMelConfig()
    sr = waveform.sample_rate
    frame_len = int(round(cfg.frame_length_ms * sr / 1000.0))
    shift = int(round(cfg.frame_shift_ms * sr / 1000.0))
    n = len(waveform.samples)
    if n < frame_len:
        raise AudioError(
            f"waveform too short for one frame: {n} samples < {frame_len}"
        )
    if cfg.n_fft < frame_len:
        raise AudioError(f"n_fft {cfg.n_fft} shorter than frame length {frame_len}")
    n_frames = 1 + (n - frame_len) // shift
    window = np.hamming(frame_len)
    starts = np.arange(n_frames) * shift
    idx = starts[:, None] + np.arange(frame_len)[None, :]
    frames = waveform.samples[idx] * window
    spec = np.fft.rfft(frames, n=cfg.n_fft, axis=1)
    power = np.abs(spec) ** 2
    fbank = mel_filterbank(cfg.n_mels, cfg.n_fft, sr)
    energies = power @ fbank.T
    feats = np.log(np.maximum(energies, cfg.floor))
    return feats.T.astype(np.float64)


def mean_normalize(feats: np.ndarray) -> np.ndarray:
    """Subtract each band's mean over time (cepstral-style mean normalization)."""
    feats = np.asarray(feats, dtype=np.float64)
    if feats.ndim != 2:
        raise AudioError(f"expected [n_mels, T] features, got shape {feats.shape}")
    return feats - feats.mean(axis=1, keepdims=True)


@dataclass
class NoisePolicy:
    """Additive white-noise augmentation policy.

    ``snr_db`` is a (low, high) range in dB; None disables augmentation and
    ``augment`` returns its input untouched.
    """

    snr_db: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.snr_db is not None:
            lo, hi = self.snr_db
            if lo > hi:
                raise AudioError(f"snr_db range is inverted: {self.snr_db}")


def augment(
    waveform: Waveform,
    policy: NoisePolicy,
    rng: np.random.Generator,
) -> Waveform:
    """Add white noise at an SNR drawn uniformly from the policy's range.

    The noise is rescaled so the realized SNR matches the drawn value
    exactly (up to float precision). A disabled policy or an infinite SNR
    returns the input unchanged.
    """
    if policy.snr_db is None:
        return waveform
    lo, hi = policy.snr_db
    snr_db = lo if lo == hi else float(rng.uniform(lo, hi))
    if math.isinf(snr_db):
        return waveform
    signal_power = float(np.mean(waveform.samples**2))
    if signal_power == 0.0:
        return waveform
    target_power = signal_power / (10.0 ** (snr_db / 10.0))
    noise = rng.standard_normal(len(waveform.samples))
    noise_power = float(np.mean(noise**2))
    noise *= math.sqrt(target_power / noise_power)
    return Waveform(samples=waveform.samples + noise, sample_rate=waveform.sample_rate)
