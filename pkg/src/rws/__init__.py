"""Reference-based weak supervision for answer sentence selection."""

__version__ = "0.1.0"
