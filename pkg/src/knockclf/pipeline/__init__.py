"""Splitting, training, evaluation metrics and model comparison."""
from .cleaning import outlier_filter
from .metrics import (
    PUBLISHED_RNN_LSTM,
    PUBLISHED_MODELS,
    ConfusionMatrix,
    MetricsReport,
    compare_models,
    comparison_vector,
    confusion,
    metrics,
    verdict,
    welch_p_value,
)
from .splits import SplitConfig, kfold_indices, kfold_split, split_indices, split_train_test
from .training import TrainLog, argmax_labels, baseline_linear, fit, predict_features
