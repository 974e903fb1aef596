class ExtractError(Exception):
    """User-facing extraction failure (bad layout, missing audio, bad model id)."""
