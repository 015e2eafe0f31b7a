"""Web usage statistics, usage factors and co-usage analysis for a bibliographic service."""

__version__ = "0.1.0"
