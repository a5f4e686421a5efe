"""Quality-saturation detection for re-encoding previously compressed images."""
__version__ = "0.1.0"
