"""Topic-level evaluation of document clustering across network variants."""

__version__ = "0.1.0"
