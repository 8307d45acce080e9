"""Unsupervised event detection over embedded short messages.

The pipeline: build a weighted message graph from embeddings and shared
attributes, coarsen it into an anchor graph, learn hyperbolic anchor
representations with a graph autoencoder, and cut event clusters out of a
differentiable partitioning tree by minimising structural information.

Submodules are imported explicitly, e.g. ``from hyperevent import geometry``.
"""

__version__ = "0.1.0"
