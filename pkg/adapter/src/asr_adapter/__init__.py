"""Recognizer adapter speaking the aligner's subprocess protocol."""

from .server import AdapterConfig, serve

__version__ = "0.1.0"
