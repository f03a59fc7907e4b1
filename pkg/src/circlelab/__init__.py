"""circlelab: a numerical laboratory for renormalization of critical circle maps."""

__version__ = "0.1.0"
