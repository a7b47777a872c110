"""pytissue - immune-inspired multi-agent algorithms over antigen and signals."""

__version__ = "0.1.0"
