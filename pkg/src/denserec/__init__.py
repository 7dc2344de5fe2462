"""Sequential recommendation with a SASRec backbone and dual-path item embeddings."""

__version__ = "0.1.0"
