"""Multisite computation offloading: profile nodes, score them, split a text
search across them and run it over simulated links or TCP workers."""

__version__ = "0.1.0"
