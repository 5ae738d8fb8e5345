"""In-hand and regrasp planning on the Dexterous Manipulation Graph."""

__version__ = "0.1.0"
