"""Exception types shared across the toolkit."""


class LoudgenError(Exception):
    """Base class for all toolkit errors."""


class AudioFormatError(LoudgenError):
    """File is not a well-formed RIFF/WAVE container."""


class UnsupportedCodecError(LoudgenError):
    """WAVE file uses an encoding other than PCM 16/24-bit or IEEE float32."""


class ChannelCountError(LoudgenError):
    """Audio has an unsupported channel count (only mono and stereo are handled)."""


class UndefinedLoudnessError(LoudgenError):
    """Integrated loudness is undefined because every block fell below the gate."""


class DimensionError(LoudgenError):
    """Tensor or matrix shapes are inconsistent with the declared layout."""


class EncoderError(LoudgenError):
    """A modal encoder failed on its payload; carries the modality tag."""

    def __init__(self, modality: str, message: str):
        super().__init__(f"[{modality}] {message}")
        self.modality = modality


class InsufficientDataError(LoudgenError):
    """An input series or dataset is too short or empty for the operation."""


class NormalizationError(LoudgenError):
    """Probability rows do not sum to one within tolerance."""


class ConditioningError(LoudgenError):
    """A covariance matrix is indefinite beyond the numerical clamp tolerance."""


class DivergenceError(LoudgenError):
    """Training or sampling produced a non-finite value."""


class ConfigError(LoudgenError):
    """Run configuration is missing, malformed, or contains an invalid override."""


class ContainerError(LoudgenError):
    """Binary container (latents, conditions, features, checkpoint) failed to parse."""
