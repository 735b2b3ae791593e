"""Reference external scoring backend for the imbkit harness."""

from .server import MODEL_CHOICES, ScoringSession, serve

__version__ = "0.1.0"
