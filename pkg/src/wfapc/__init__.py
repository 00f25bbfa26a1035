"""Wind-farm active power control with saturation compensation and thrust balancing."""

__version__ = "0.1.0"
