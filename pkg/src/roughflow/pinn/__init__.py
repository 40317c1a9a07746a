from .model import (
    FlowDomain,
    PinnModel,
    build_model,
    model_vorticity,
    predict_fields,
)
from .sampling import (
    CollocationSet,
    LabeledDataset,
    dataset_from_snapshots,
    sample_boundary,
    sample_collocation,
)
from .losses import (
    LossWeights,
    boundary_loss,
    data_loss,
    pde_residuals,
    physics_loss,
    total_loss,
)
from .losses import total_loss_and_grad
from .training import HISTORY_COLUMNS, HistoryRow, TrainConfig, train

__all__ = [
    "FlowDomain", "PinnModel", "build_model", "model_vorticity",
    "predict_fields",
    "CollocationSet", "LabeledDataset", "dataset_from_snapshots",
    "sample_boundary", "sample_collocation",
    "LossWeights", "boundary_loss", "data_loss", "pde_residuals",
    "physics_loss", "total_loss",
    "total_loss_and_grad",
    "HISTORY_COLUMNS", "HistoryRow", "TrainConfig", "train",
]
