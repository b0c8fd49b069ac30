from .common import NOISE, ClusterAssignment, canonicalize, outlier_fraction, read_assignment, write_assignment
from .hdbscan import CondensedTree, HdbscanParams, HdbscanResult, TooFewPoints, hdbscan
from .kmeans import KExceedsPoints, KMeansParams, KMeansResult, kmeans, kmeans_fit

__all__ = [
    "NOISE", "ClusterAssignment", "canonicalize", "outlier_fraction", "read_assignment",
    "write_assignment", "CondensedTree", "HdbscanParams", "HdbscanResult", "TooFewPoints",
    "hdbscan", "KExceedsPoints", "KMeansParams", "KMeansResult", "kmeans", "kmeans_fit",
]
