"""AIS algorithms hosted by the tissue server."""
