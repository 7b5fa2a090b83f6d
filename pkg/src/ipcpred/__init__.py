"""IPC prediction from short-interval architecture-simulation statistics."""

__version__ = "0.1.0"
