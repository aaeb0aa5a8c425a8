"""Curved label-space losses for classification.

A metric tensor over the class labels makes some confusions cheaper than
others. The metric can be built from a model's own exponentially averaged
confusion statistics and plugged into curved versions of squared error and
cross-entropy.
"""

from .confusion import (
    ConfusionAccumulator,
    EmaState,
    MetricConfig,
    build_metric,
    effective_distance,
    ema_update,
    metric_from_history,
    normalize,
)
from .kernels import BACKEND_NAME
from .losses import cce, cce_grad, cqe, cqe_grad, crossentropy, mse
from .metric import (
    Metric,
    class_pair_sq_distance,
    curved_sq_distance,
    distance_report,
    euclidean_sq_distance,
    identity_metric,
    one_hot,
)

__version__ = "0.1.0"
