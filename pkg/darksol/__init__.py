"""Dark-soliton chain stability laboratory."""

__version__ = "0.1.0"
