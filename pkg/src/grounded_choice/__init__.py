"""Visual grounding of word embeddings and Max/GAM models of image-choice behaviour."""

from .embeddings import EmbeddingSpace, ImageVectorStore, cosine, load_embeddings

__version__ = "0.1.0"
__all__ = ["EmbeddingSpace", "ImageVectorStore", "cosine", "load_embeddings"]
