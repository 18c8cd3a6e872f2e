"""Exception hierarchy shared across the toolkit."""


class FeatAttackError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(FeatAttackError):
    """An input violates a documented precondition or invariant."""


class ConfigurationError(FeatAttackError):
    """A configuration value is out of its legal range."""


class DegenerateFeatureError(FeatAttackError):
    """A feature vector is unusable (zero norm or non-finite entries)."""


class EncoderBackendError(FeatAttackError):
    """An encoder / caption / text backend failed; carries the backend message."""


class JudgeError(FeatAttackError):
    """The judge backend failed or returned an unparseable score."""


class RegistryError(FeatAttackError):
    """An adapter name is unknown or an adapter spec is malformed."""
