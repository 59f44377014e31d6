from .tensor import Tape, Tensor, TensorError
from .forecaster import SpikeAwareLSTM, composite_loss, predict_horizon
from .sac import SacAgent, soft_target
from .allocation import apply_action, reward
from .policies import PolicyKind, make_policy

__all__ = [
    "Tape",
    "Tensor",
    "TensorError",
    "SpikeAwareLSTM",
    "composite_loss",
    "predict_horizon",
    "SacAgent",
    "soft_target",
    "apply_action",
    "reward",
    "PolicyKind",
    "make_policy",
]
