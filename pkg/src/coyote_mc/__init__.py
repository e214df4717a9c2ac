"""coyote-mc: concolic unit-test generation for MiniC programs."""

__version__ = "0.1.0"
