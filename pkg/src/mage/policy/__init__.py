from .features import KuhnFeaturizer, SokobanFeaturizer, TicTacToeFeaturizer, make_featurizer
from .linear import (
    ActionDecision,
    LinearSoftmaxPolicy,
    NumericalError,
    PolicyParams,
    apply_update,
    grad_from_cache,
    masked_log_softmax,
)
from .remote import ChatClient, EndpointConfig, ParsedAction, RemotePolicy, parse_action

__all__ = [
    "ActionDecision", "ChatClient", "EndpointConfig", "KuhnFeaturizer", "LinearSoftmaxPolicy",
    "NumericalError", "ParsedAction", "PolicyParams", "RemotePolicy", "SokobanFeaturizer",
    "TicTacToeFeaturizer", "apply_update", "grad_from_cache", "make_featurizer",
    "masked_log_softmax", "parse_action",
]
