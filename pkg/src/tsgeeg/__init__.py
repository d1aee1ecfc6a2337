"""Band-power and time-series-of-graphs features for multi-channel EEG."""

__version__ = "0.1.0"
