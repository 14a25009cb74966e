"""Stratified groups, degrees of submanifolds and intrinsic measures."""

__version__ = "0.1.0"
