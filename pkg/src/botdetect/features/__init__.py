"""Per-address behavioral features and their aggregators."""

from .aggregates import (  # noqa: F401
    MISSING,
    benford_p_value,
    categorical_stats,
    first_significant_digit,
    gap_based_sleepiness,
    hour_of_day_entropy,
    numerical_stats,
    trade_value_clustering,
)
from .build import (  # noqa: F401
    FeatureMatrix,
    build_feature_matrix,
    feature_registry,
    read_features_csv,
    write_features_csv,
)
