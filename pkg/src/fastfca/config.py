"""Run configuration: flat key=value files plus command-line overrides.

The config keys mirror the standard experimental conditions (sampling
frequency 16 kHz, frame length 1024, frame shift 512, square-root Hann
window, 10 EM iterations); the file format is one ``key = value`` pair per
line with ``#`` comments.
"""

from dataclasses import dataclass, fields

from .errors import ConfigurationError

ALGORITHMS = ("fca", "fastfca", "both")
INITIALIZERS = ("masks", "random")


@dataclass
class RunConfig:
    sampling_frequency: int = 16000
    frame_length: int = 1024
    frame_shift: int = 512
    window: str = "sqrt_hann"
    em_iterations: int = 10
    algorithm: str = "fastfca"
    init: str = "masks"
    seed: int = 0
    rt60: float = 0.30
    channels: int = 2
    duration: float = 8.0
    trials: int = 10
    threads: int = 1
    out_dir: str = "."

    def __post_init__(self):
        if self.window != "sqrt_hann":
            raise ConfigurationError(
                f"only the sqrt_hann window is supported, got {self.window!r}"
            )
        if self.frame_shift * 2 != self.frame_length:
            raise ConfigurationError("frame_shift must be frame_length/2")
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"algorithm must be one of {ALGORITHMS}")
        if self.init not in INITIALIZERS:
            raise ConfigurationError(f"init must be one of {INITIALIZERS}")
        if self.em_iterations < 0:
            raise ConfigurationError("em_iterations must be >= 0")


def parse_config_file(path):
    """Parse a flat ``key = value`` config file into a dict of strings."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = value
    return values


def build_config(file_values=None, overrides=None):
    """Merge config-file values and explicit overrides into a RunConfig.

    ``overrides`` win over ``file_values``; both may be partial. Unknown
    keys are rejected.
    """
    by_name = {"int": int, "float": float, "str": str}
    known = {
        f.name: (f.type if isinstance(f.type, type) else by_name[f.type])
        for f in fields(RunConfig)
    }
    merged = {}
    for source in (file_values or {}), (overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            if key not in known:
                raise ConfigurationError(f"unknown config key {key!r}")
            cast = known[key]
            try:
                merged[key] = cast(value)
            except ValueError:
                raise ConfigurationError(
                    f"config key {key!r}: cannot parse {value!r} as {cast.__name__}"
                ) from None
    return RunConfig(**merged)
