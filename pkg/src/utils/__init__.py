"""Shared plumbing: logging, configuration, errors and artifact writers."""
