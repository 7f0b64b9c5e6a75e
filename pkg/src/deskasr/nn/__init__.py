from .layers import (
    apply_dropout,
    conv2d_forward,
    maxout_backward,
    maxout_forward,
    maxpool_forward,
    unfolded_rnn_forward,
)
from .network import (
    ForwardResult,
    InputView,
    LayerSpec,
    Minibatch,
    Network,
    NetworkSpec,
    backprop,
    cross_entropy,
    init_params,
    network_forward,
)
from .io import load_network, save_network

__all__ = [
    "ForwardResult",
    "InputView",
    "LayerSpec",
    "Minibatch",
    "Network",
    "NetworkSpec",
    "apply_dropout",
    "backprop",
    "conv2d_forward",
    "cross_entropy",
    "init_params",
    "load_network",
    "maxout_backward",
    "maxout_forward",
    "maxpool_forward",
    "network_forward",
    "save_network",
    "unfolded_rnn_forward",
]
