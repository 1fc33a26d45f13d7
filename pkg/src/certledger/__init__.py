"""Blockchain-backed certificate log with light-client state proofs."""

__version__ = "0.1.0"
