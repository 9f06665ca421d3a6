"""Producers, analytics jobs, socket front-end and command line."""
