"""Multi-view spatio-temporal taxi demand forecasting."""

__version__ = "0.1.0"
