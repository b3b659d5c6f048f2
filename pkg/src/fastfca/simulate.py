"""Synthetic reverberant two-source mixtures with ground-truth images.

Impulse responses are a delayed direct-path spike plus an exponentially
decaying Gaussian noise tail (60 dB down at the chosen RT60), which produces
exactly the diffuse, full-rank spatial statistics the separation model
targets. Sources default to speech-shaped noise with slow amplitude
modulation so their power spectra are usefully time-variant.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConfigurationError
from .types import AudioBuffer

# RT60 presets, seconds.
RT60_PRESETS = (0.13, 0.20, 0.25, 0.30, 0.37, 0.44)

# Amplitude of the diffuse tail relative to the unit direct path.
DEFAULT_TAIL_GAIN = 0.035


@dataclass
class RoomSpec:
    """Synthetic room description for two sources and ``channels`` microphones.

    ``direct_delays``/``direct_gains`` are (source, channel) arrays; the
    defaults give the two sources opposite delay gradients across the array
    (distinct directions) with mild level differences. ``filter_length``
    defaults to 1.25 * RT60 plus the largest delay.
    """

    rt60: float
    channels: int = 2
    sample_rate: int = 16000
    source_count: int = 2
    filter_length: int | None = None
    seed: int = 0
    direct_delays: np.ndarray | None = None
    direct_gains: np.ndarray | None = None
    tail_gain: float = DEFAULT_TAIL_GAIN

    def __post_init__(self):
        if self.rt60 <= 0:
            raise ConfigurationError("rt60 must be positive")
        if self.channels < 2:
            raise ConfigurationError("need at least two channels")
        if self.source_count != 2:
            raise ConfigurationError("exactly two sources are supported")
        if self.direct_delays is None:
            step = np.arange(self.channels)
            self.direct_delays = np.stack([8 + 5 * step, 8 + 5 * step[::-1]])
        if self.direct_gains is None:
            # same level profile for both sources so per-channel image
            # energies stay balanced; direction contrast comes from the
            # opposite delay gradients and the independent diffuse tails
            self.direct_gains = np.ones((2, self.channels))
        self.direct_delays = np.asarray(self.direct_delays, dtype=int)
        self.direct_gains = np.asarray(self.direct_gains, dtype=float)
        if self.filter_length is None:
            self.filter_length = (
                int(1.25 * self.rt60 * self.sample_rate)
                + int(self.direct_delays.max())
                + 1
            )
        if self.filter_length < 1:
            raise ConfigurationError("filter_length must be >= 1")


@dataclass
class GroundTruth:
    """A mixture and the two per-source multichannel images it sums from."""

    mixture: AudioBuffer
    images: tuple


def synth_rir(spec):
    """Generate (source, channel) impulse responses for a room spec.

    Each response is a unit-energy direct path at ``direct_delays[j, i]``
    plus a Gaussian tail whose amplitude envelope decays by 60 dB at
    ``rt60``. Deterministic for a given seed.
    """
    rng = np.random.default_rng(spec.seed)
    length = spec.filter_length
    fs = spec.sample_rate
    rirs = np.zeros((2, spec.channels, length))
    decay = 3.0 * np.log(10.0) / (spec.rt60 * fs)
    for j in range(2):
        for i in range(spec.channels):
            delay = int(spec.direct_delays[j, i])
            gain = float(spec.direct_gains[j, i])
            if delay >= length:
                raise ConfigurationError("direct delay exceeds filter length")
            h = np.zeros(length)
            h[delay] = gain
            tail = np.arange(delay + 1, length)
            if tail.size:
                env = np.exp(-decay * (tail - delay))
                h[tail] = spec.tail_gain * env * rng.standard_normal(tail.size)
            rirs[j, i] = h / abs(gain)
    return rirs


def mix(sources, rirs):
    """Convolve two mono sources with the room responses and sum.

    The second image is rescaled so both images carry equal energy, which
    calibrates the input SDR of the mixture against either image to 0 dB.
    The mixture is exactly the sample-wise sum of the returned images.
    """
    src1, src2 = sources
    if src1.sample_rate != src2.sample_rate:
        raise ConfigurationError("sources must share a sample rate")
    if src1.channels != 1 or src2.channels != 1:
        raise ConfigurationError("sources must be single-channel")
    if src1.length != src2.length:
        raise ConfigurationError("sources must share a length")
    length = src1.length
    n_chan = rirs.shape[1]

    images = np.empty((2, n_chan, length))
    for j, src in enumerate((src1, src2)):
        for i in range(n_chan):
            images[j, i] = fftconvolve(src.samples[0], rirs[j, i])[:length]

    e1 = np.sum(images[0] ** 2, axis=1)
    e2 = np.sum(images[1] ** 2, axis=1)
    if np.all(e1 > 0) and np.all(e2 > 0):
        # geometric mean over channels zeroes the channel-averaged dB ratio
        images[1] *= np.exp(0.5 * np.mean(np.log(e1 / e2)))
    mixture = images[0] + images[1]
    sr = src1.sample_rate
    return GroundTruth(
        mixture=AudioBuffer(sr, mixture),
        images=(AudioBuffer(sr, images[0]), AudioBuffer(sr, images[1])),
    )


MODULATION_DEPTH = 1.2


def _slow_noise(rng, n, freqs):
    carrier = rng.standard_normal(n)
    lowpass = np.exp(-0.5 * (freqs / 4.0) ** 2)
    return np.fft.irfft(np.fft.rfft(carrier) * lowpass, n)


def _shaped_carrier(rng, n, freqs):
    white = rng.standard_normal(n)
    envelope = (freqs / (freqs + 120.0)) / (1.0 + (freqs / 600.0) ** 1.2)
    return np.fft.irfft(np.fft.rfft(white) * envelope, n)


def _finish(x, n, bin_parity, sample_rate):
    if bin_parity is not None:
        spectrum = np.fft.rfft(x)
        spectrum[np.arange(spectrum.size) % 2 != bin_parity] = 0
        x = np.fft.irfft(spectrum, n)
    rms = np.sqrt(np.mean(x**2))
    if rms > 0:
        x = x / rms
    return AudioBuffer(sample_rate, x[None, :])


def speech_shaped_noise(duration, sample_rate, seed, modulated=True, bin_parity=None):
    """Mono noise with a speech-like long-term spectrum and slow modulation.

    The spectral envelope is flat through the low hundreds of Hz and rolls
    off above; the amplitude modulation is a smoothed lognormal envelope in
    the few-Hz range, giving the time-variant power a separation model can
    exploit. Deterministic for a given seed.

    ``bin_parity`` (0 or 1) restricts the signal to every other rfft bin of
    the full-length grid. Two sources on opposite parities are mutually
    orthogonal at all small lags, which lets the mixer calibrate the input
    SDR exactly; the comb spacing (1/duration Hz) is far below STFT
    resolution, so the signals remain broadband for the separation model.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    x = _shaped_carrier(rng, n, freqs)
    if modulated:
        slow = _slow_noise(rng, n, freqs)
        std = slow.std()
        if std > 0:
            x = x * np.exp(MODULATION_DEPTH * slow / std)
    return _finish(x, n, bin_parity, sample_rate)


def source_pair(duration, sample_rate, seed, modulated=True):
    """Two independent speech-shaped sources on complementary spectral combs.

    The pair's modulation envelopes are explicitly decorrelated (the second
    slow modulator is orthogonalized against the first), so the two sources
    never share their activity pattern by accident.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)

    carriers = [_shaped_carrier(rng, n, freqs) for _ in range(2)]
    slow_a = _slow_noise(rng, n, freqs)
    slow_b = _slow_noise(rng, n, freqs)
    if not modulated:
        return (
            _finish(carriers[0], n, 0, sample_rate),
            _finish(carriers[1], n, 1, sample_rate),
        )
    slow_a = slow_a - slow_a.mean()
    slow_b = slow_b - slow_b.mean()
    slow_b = slow_b - slow_a * (slow_a @ slow_b) / (slow_a @ slow_a)
    out = []
    for parity, (carrier, slow) in enumerate(
        zip(carriers, (slow_a, slow_b))
    ):
        x = carrier * np.exp(MODULATION_DEPTH * slow / slow.std())
        out.append(_finish(x, n, parity, sample_rate))
    return tuple(out)
