"""Experiment harness: corpora, scenarios, CSV reports and the CLI."""
