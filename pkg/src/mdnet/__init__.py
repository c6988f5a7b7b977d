"""Network Bell tests with measurement-dependent hidden variables."""

__version__ = "0.1.0"
