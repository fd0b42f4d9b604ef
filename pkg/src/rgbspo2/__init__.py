"""Contactless SpO2 from RGB hand video via multi-channel ratio-of-ratios features."""

from .errors import Spo2Error

__version__ = "0.1.0"

__all__ = ["Spo2Error", "__version__"]
