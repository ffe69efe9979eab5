"""Lifelong multi-label learning on a growing label-correlation graph.

Tasks arrive sequentially with disjoint class sets and partial labels. The
library keeps a correlation matrix over all seen classes (hard statistics
inside a task, expert soft labels across tasks), propagates fixed class
embeddings through a trainable two-layer graph head, scores examples by
inner product with extracted features, and fights forgetting with expert
distillation plus a penalty on moving old node representations. Training
is strictly single-pass.
"""

from .backbone import Backbone
from .correlation import CorrelationMatrix, LabelStats
from .errors import (ConfigError, DataError, DomainError, NumericError,
                     ShapeError)
from .expert import ExpertSnapshot, snapshot
from .graph import GraphHead, init_embeddings
from .losses import LossWeights, cls_loss, dst_loss, gph_loss, total_loss
from .metrics import (EvalBatch, MetricReport, evaluate, forgetting,
                      mean_average_precision, prf_metrics)
from .stream import Example, SplitReport, TaskStream, generate_synthetic, \
    split_dataset
from .trainer import RunResult, TrainConfig, TrainRecord, load_config, \
    predict, run

__version__ = "0.1.0"

__all__ = [
    "Backbone", "ConfigError", "CorrelationMatrix", "DataError",
    "DomainError", "EvalBatch", "Example", "ExpertSnapshot", "GraphHead",
    "LabelStats", "LossWeights", "MetricReport", "NumericError",
    "RunResult", "ShapeError", "SplitReport", "TaskStream", "TrainConfig",
    "TrainRecord", "cls_loss", "dst_loss", "evaluate", "forgetting",
    "generate_synthetic", "gph_loss", "init_embeddings", "load_config",
    "mean_average_precision", "predict", "prf_metrics", "run", "snapshot",
    "split_dataset", "total_loss", "__version__",
]
