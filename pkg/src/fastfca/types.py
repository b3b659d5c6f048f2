"""Domain containers passed between the toolkit's modules.

Array layout conventions (fixed throughout the package):

* STFT tensors are indexed ``(frame n, bin f, channel i)``.
* Per-source quantities carry a leading source axis ``j`` (two sources).
* Spatial covariance matrices are indexed ``(j, f, i, i')``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


@dataclass
class AudioBuffer:
    """Multichannel time-domain audio, ``samples`` shaped (channels, length)."""

    sample_rate: int
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.sample_rate <= 0:
            raise ConfigurationError("sample_rate must be positive")
        if self.samples.ndim != 2:
            raise ConfigurationError("samples must be a (channels, length) array")

    @property
    def channels(self):
        return self.samples.shape[0]

    @property
    def length(self):
        return self.samples.shape[1]

    @property
    def duration(self):
        """Length in seconds."""
        return self.samples.shape[1] / self.sample_rate


@dataclass
class SpectrogramTensor:
    """Complex STFT coefficients ``data[n, f, i]`` for N frames, F bins, I channels."""

    data: np.ndarray
    sample_rate: int = 16000
    frame_length: int = 1024
    frame_shift: int = 512
    original_length: int | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 3:
            raise ConfigurationError("spectrogram data must be (frames, bins, channels)")
        if not np.isfinite(self.data).all():
            raise ConfigurationError("spectrogram contains non-finite values")

    @property
    def frames(self):
        return self.data.shape[0]

    @property
    def bins(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]


@dataclass
class SpatialModel:
    """Two-source spatial model: power spectra ``v[j, n, f]`` and covariances ``S[j, f, :, :]``.

    ``v_floor[f]`` is the per-bin lower bound kept on ``v`` by the M-step.
    """

    v: np.ndarray
    S: np.ndarray
    v_floor: np.ndarray

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=np.float64)
        self.S = np.asarray(self.S, dtype=np.complex128)
        self.v_floor = np.asarray(self.v_floor, dtype=np.float64)

    @property
    def sources(self):
        return self.v.shape[0]

    @property
    def channels(self):
        return self.S.shape[-1]

    def copy(self):
        return SpatialModel(self.v.copy(), self.S.copy(), self.v_floor.copy())


@dataclass
class PosteriorMoments:
    """Posterior source-image moments: means ``mu[j, n, f, i]`` and second
    moments ``Phi[j, n, f, i, i']``."""

    mu: np.ndarray
    Phi: np.ndarray


@dataclass
class OpCounts:
    """Structural operation tally for the EM inner loops.

    ``frame_*`` counters cover work done once per time-frequency point;
    ``bin_*`` counters cover work done once per frequency bin per iteration.
    """

    frame_matrix_inversions: int = 0
    frame_matrix_products: int = 0
    bin_gevd_count: int = 0
    bin_matrix_products: int = 0

    def add(self, inversions=0, products=0, gevds=0, bin_products=0):
        self.frame_matrix_inversions += int(inversions)
        self.frame_matrix_products += int(products)
        self.bin_gevd_count += int(gevds)
        self.bin_matrix_products += int(bin_products)


@dataclass
class SeparationResult:
    """Output of one EM engine run.

    ``images`` holds the MMSE source-image estimates in the STFT domain,
    shaped (2, frames, bins, channels). ``loglik_trace[0]`` is the
    log-likelihood under the initial parameters and ``loglik_trace[l]`` after
    ``l`` EM iterations. ``em_seconds`` times the EM loop only (likelihood
    evaluation and history recording excluded).
    """

    algorithm: str
    images: np.ndarray
    loglik_trace: list[float]
    iteration_seconds: list[float]
    em_seconds: float
    op_counts: OpCounts
    model: SpatialModel
    history: list[dict] = field(default_factory=list)
