"""Trace-driven simulator of a two-level inclusive cache hierarchy with
remapped (randomized) set indexing, an eviction-set attack harness, and
analysis tooling for the resulting security and latency properties.
"""

__version__ = "0.1.0"
