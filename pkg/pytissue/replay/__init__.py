"""Trace parsing, replay log files, the replay client and synthetic datasets."""
