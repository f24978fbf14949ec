"""Preference-trained machine translation quality scoring and meta-evaluation."""

__version__ = "0.1.0"
