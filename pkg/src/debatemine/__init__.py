"""debatemine: mining engine for assembly-debate corpora."""

__version__ = "0.1.0"
