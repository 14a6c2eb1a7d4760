"""Truth-telling reservation options."""
__version__ = "0.1.0"
