"""Tissue engine: cell kit, clock, scheduler, probes and the server."""
