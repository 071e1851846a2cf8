"""Click-counting nonclassicality witnesses for time-multiplexed detectors."""

__version__ = "0.1.0"
