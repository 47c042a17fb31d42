"""Time-series building blocks shared by the classifiers."""

from .distances import DISTANCES, dtw_distance, euclidean_distance, pairwise_distances, twe_distance
from .features import (
    QUANTILES,
    STATISTICS,
    FeatureVector,
    interval_features,
    interval_features_batch,
    summary_names,
    summary_stats,
    summary_stats_batch,
)
from .tree import DecisionTree, RandomForest, fit_tree, forest_from_json, forest_to_json, predict_tree

__all__ = [
    "DISTANCES",
    "dtw_distance",
    "euclidean_distance",
    "pairwise_distances",
    "twe_distance",
    "QUANTILES",
    "STATISTICS",
    "FeatureVector",
    "interval_features",
    "interval_features_batch",
    "summary_names",
    "summary_stats",
    "summary_stats_batch",
    "DecisionTree",
    "RandomForest",
    "fit_tree",
    "forest_from_json",
    "forest_to_json",
    "predict_tree",
]
