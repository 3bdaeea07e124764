"""Exact tropical-independence and intersection-theory toolkit."""

__version__ = "0.1.0"
