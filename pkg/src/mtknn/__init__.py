"""Metamorphic testing and mutation analysis for a k-nearest-neighbours classifier."""

from .dataset import AttributeSchema, Dataset, GeneratorConfig, QuerySet, generate_random_case
from .knn import KnnClassifier, euclidean_distance, k_nearest, predict, predict_all
from .mr_catalog import MrId, check_relation, derive_follow_up, required_k

__version__ = "0.1.0"

__all__ = [
    "AttributeSchema", "Dataset", "GeneratorConfig", "QuerySet", "generate_random_case",
    "KnnClassifier", "euclidean_distance", "k_nearest", "predict", "predict_all",
    "MrId", "check_relation", "derive_follow_up", "required_k",
]
