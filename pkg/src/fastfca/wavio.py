"""WAV reading and writing.

Reads 16-bit, 32-bit integer and float PCM; always writes 32-bit float so
separated images (which can exceed full scale) round-trip losslessly.
"""

import numpy as np
from scipy.io import wavfile

from .errors import ConfigurationError
from .types import AudioBuffer

_INT_SCALES = {np.int16: 2.0**15, np.int32: 2.0**31}


def read_wav(path):
    """Read a WAV file into an AudioBuffer, samples scaled to +-1 for PCM."""
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise ConfigurationError(f"cannot read WAV file: {path}") from None
    except ValueError as exc:
        raise ConfigurationError(f"unreadable WAV file {path}: {exc}") from None
    if data.ndim == 1:
        data = data[:, None]
    samples = data.T.astype(np.float64)
    for dtype, scale in _INT_SCALES.items():
        if data.dtype == dtype:
            samples = samples / scale
            break
    else:
        if data.dtype not in (np.float32, np.float64):
            raise ConfigurationError(
                f"unsupported WAV sample format {data.dtype} in {path}"
            )
    return AudioBuffer(sample_rate=int(rate), samples=samples)


def write_wav(path, audio):
    """Write an AudioBuffer as 32-bit float PCM."""
    wavfile.write(path, audio.sample_rate, audio.samples.T.astype(np.float32))
