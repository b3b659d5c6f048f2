"""STFT analysis/synthesis with a square-root Hann window at 50% overlap.

The same window is applied on both sides, so analysis*synthesis equals the
periodic Hann window, which sums to one at half-frame overlap; together with
half a frame of leading zero-padding this gives exact overlap-add
reconstruction over the whole signal.
"""

import numpy as np

from .errors import ConfigurationError
from .types import AudioBuffer, SpectrogramTensor


def sqrt_hann(frame_length):
    """Square root of the periodic Hann window."""
    t = np.arange(frame_length)
    return np.sqrt(0.5 * (1.0 - np.cos(2.0 * np.pi * t / frame_length)))


def _validate_params(frame_length, frame_shift):
    if frame_length < 2 or (frame_length & (frame_length - 1)) != 0:
        raise ConfigurationError(f"frame_length must be a power of two, got {frame_length}")
    if frame_shift * 2 != frame_length:
        raise ConfigurationError(
            f"frame_shift must be frame_length/2, got {frame_shift} for length {frame_length}"
        )


def num_frames(length, frame_shift):
    """Frames needed so every sample gets full overlap-add weight."""
    return max((length - 1) // frame_shift + 2, 2)


def stft_analyze(audio, frame_length=1024, frame_shift=512):
    """Transform multichannel audio into an STFT tensor.

    Parameters
    ----------
    audio : AudioBuffer
    frame_length : int
        Power of two; 1024 by default (64 ms at 16 kHz).
    frame_shift : int
        Must equal ``frame_length // 2``.

    Returns
    -------
    SpectrogramTensor
        Complex coefficients shaped (frames, frame_length//2 + 1, channels).
        Half a frame of zeros is prepended and the tail zero-padded so the
        frame grid covers every sample.
    """
    _validate_params(frame_length, frame_shift)
    x = audio.samples
    n_chan, length = x.shape
    n_frames = num_frames(length, frame_shift)
    padded_len = (n_frames - 1) * frame_shift + frame_length
    padded = np.zeros((n_chan, padded_len))
    padded[:, frame_shift : frame_shift + length] = x

    window = sqrt_hann(frame_length)
    idx = np.arange(frame_length)[None, :] + frame_shift * np.arange(n_frames)[:, None]
    frames = padded[:, idx] * window  # (channels, frames, frame_length)
    spec = np.fft.rfft(frames, axis=-1)
    return SpectrogramTensor(
        data=spec.transpose(1, 2, 0),
        sample_rate=audio.sample_rate,
        frame_length=frame_length,
        frame_shift=frame_shift,
        original_length=length,
    )


def stft_synthesize(spec, frame_length=1024, frame_shift=512, length=None):
    """Overlap-add a spectrogram tensor back to time-domain audio.

    ``length`` (or ``spec.original_length``) trims the output; without either
    the full overlap-add extent minus the padding is returned. DC and Nyquist
    bins are treated as real-valued.
    """
    _validate_params(frame_length, frame_shift)
    data = spec.data
    n_frames, n_bins, n_chan = data.shape
    if n_bins != frame_length // 2 + 1:
        raise ConfigurationError(
            f"spectrogram has {n_bins} bins, expected {frame_length // 2 + 1}"
        )
    half = data.transpose(2, 0, 1).copy()
    half[..., 0] = half[..., 0].real
    half[..., -1] = half[..., -1].real
    frames = np.fft.irfft(half, n=frame_length, axis=-1) * sqrt_hann(frame_length)

    padded_len = (n_frames - 1) * frame_shift + frame_length
    out = np.zeros((n_chan, padded_len))
    for k in range(n_frames):
        out[:, k * frame_shift : k * frame_shift + frame_length] += frames[:, k]

    out = out[:, frame_shift:]
    if length is None:
        length = spec.original_length
    if length is not None:
        if length > out.shape[1]:
            raise ConfigurationError(
                f"requested length {length} exceeds synthesized extent {out.shape[1]}"
            )
        out = out[:, :length]
    return AudioBuffer(sample_rate=spec.sample_rate, samples=out)
