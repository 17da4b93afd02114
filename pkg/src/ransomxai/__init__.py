"""Ransomware family classification with wrapper feature selection and
Shapley explanations, on API-call and network-traffic features."""

__version__ = "0.1.0"
