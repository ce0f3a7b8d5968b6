"""Urban land-use classification from aggregated per-tower hourly call counts."""

__version__ = "0.1.0"
