"""Spatio-temporal deep graph infomax: unsupervised node embeddings for traffic forecasting."""

__version__ = "0.1.0"
