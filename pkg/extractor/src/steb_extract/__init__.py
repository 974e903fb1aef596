"""Audio corpus to embedding-table extraction with frozen speech models."""

__version__ = "0.1.0"
