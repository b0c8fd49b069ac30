"""Topic-modeling workbench: embedding, UMAP, HDBSCAN / k-Means, c-TF-IDF, LDA and evaluation."""

__version__ = "0.1.0"
