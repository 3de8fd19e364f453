"""Exception types shared across the engine."""


class ProfileError(ValueError):
    """A profile document failed validation; the message names the offending field."""


class ConfigError(ValueError):
    """An experiment configuration is malformed or references unknown keys."""
