"""Taste-peptide design toolkit.

A library plus CLI covering the full workflow: annotated corpus
preparation, loss-supervised variational-autoencoder sequence generation
with taste avoidance, latent-space candidate filtering, similarity
clustering, toxicity screening, and physicochemical profiling.
"""

__version__ = "0.1.0"
