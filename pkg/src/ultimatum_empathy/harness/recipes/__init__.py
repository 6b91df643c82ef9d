"""Bundled sweep recipes (``*.cfg``) for the standard parameter sets."""
