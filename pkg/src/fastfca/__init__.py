"""Two-source multichannel separation with full-rank spatial covariance models.

Two EM engines share one model: a reference engine that works frame-by-frame
on full covariance matrices, and a fast engine that removes all per-frame
matrix inversions and products by jointly diagonalizing the two spatial
covariances per frequency bin. The package also ships the STFT front end,
mixture simulator, SDR/RTF metrics, and a CLI that ties them together.
"""

from .conventional import e_step, fca_run, log_likelihood, m_step
from .fast import (
    fast_e_step,
    fast_m_step_S,
    fast_m_step_v,
    fastfca_run,
    propagate_pencil,
    transform_observations,
)
from .initializers import init_from_masks, init_random
from .metrics import EvalReport, measure_rtf, sdr, sdr_pairing
from .pencil import PencilDecomposition, gevd_hpd, hermitian_eig, solve_hermitian_system
from .simulate import (
    GroundTruth,
    RoomSpec,
    mix,
    source_pair,
    speech_shaped_noise,
    synth_rir,
)
from .stft import stft_analyze, stft_synthesize
from .types import (
    AudioBuffer,
    OpCounts,
    PosteriorMoments,
    SeparationResult,
    SpatialModel,
    SpectrogramTensor,
)

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer",
    "EvalReport",
    "GroundTruth",
    "OpCounts",
    "PencilDecomposition",
    "PosteriorMoments",
    "RoomSpec",
    "SeparationResult",
    "SpatialModel",
    "SpectrogramTensor",
    "e_step",
    "fast_e_step",
    "fast_m_step_S",
    "fast_m_step_v",
    "fastfca_run",
    "fca_run",
    "gevd_hpd",
    "hermitian_eig",
    "init_from_masks",
    "init_random",
    "log_likelihood",
    "m_step",
    "measure_rtf",
    "mix",
    "propagate_pencil",
    "sdr",
    "sdr_pairing",
    "solve_hermitian_system",
    "source_pair",
    "speech_shaped_noise",
    "stft_analyze",
    "stft_synthesize",
    "synth_rir",
    "transform_observations",
]
