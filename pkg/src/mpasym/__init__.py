"""Large-distance asymptotics of multi-point correlators in massless 1D models."""

__version__ = "0.1.0"
