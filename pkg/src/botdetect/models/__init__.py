"""Preprocessing, clustering, classification, and evaluation metrics."""

from .preprocess import Preprocessor, fit_preprocessor, matrix_to_array  # noqa: F401
from .cluster import (  # noqa: F401
    GMMModel,
    KMeansModel,
    gmm_bic,
    gmm_fit,
    gmm_predict,
    kmeans_fit,
    kmeans_predict,
)
from .ensembles import (  # noqa: F401
    AdaBoostModel,
    GradientBoostingModel,
    RandomForestModel,
    fit_adaboost,
    fit_gradient_boosting,
    fit_random_forest,
    load_classifier,
    save_classifier,
)
from .metrics import (  # noqa: F401
    ClusterReport,
    CVReport,
    MetricsReport,
    classification_metrics,
    cluster_quality,
    cross_validate,
    elbow_select,
    format_mean_ci,
    silhouette_score,
    t_confidence_interval,
)
