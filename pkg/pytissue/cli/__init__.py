"""CLI modules for pytissue."""
