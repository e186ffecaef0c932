"""Management framework for tiered secure data research environments."""

__version__ = "0.1.0"
