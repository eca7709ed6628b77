from .cfs import cfs_select, select_features, subset_merit
from .models import (
    LearnerKind,
    Prediction,
    TrainedModel,
    model_from_json,
    model_to_json,
    predict,
    predict_many,
    train,
)

__all__ = [
    "LearnerKind",
    "Prediction",
    "TrainedModel",
    "cfs_select",
    "model_from_json",
    "model_to_json",
    "predict",
    "predict_many",
    "select_features",
    "subset_merit",
    "train",
]
