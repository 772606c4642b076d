"""Desk-scale image-forensics audit toolkit.

Spectral fingerprinting of image datasets, preprocessing-pipeline comparison,
lossy-compression degradation, a self-contained trainable detector with PGD
evaluation, and exact t-SNE embedding.
"""

__version__ = "0.1.0"
