"""Large-system analysis of optimum joint user-activity and data detection in random CDMA."""

__version__ = "0.1.0"
