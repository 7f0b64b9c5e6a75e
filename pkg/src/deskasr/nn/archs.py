"""Builders for the model families: sigmoid DNN, maxout DNN, CNN, unfolded RNN.

All builders take the canonical frame-row dimension plus an InputView and
derive the first layer's size from the view, so any family can be fused
with any other on a shared minibatch.
"""

import math

from ..errors import ConfigError
from . import network as net
from .network import InputView, LayerSpec, NetworkSpec


def select_view(base_dim, context, frames, components=(0,)):
    return InputView("select", base_dim, context, tuple(frames), tuple(components))


def dnn_view(base_dim, context):
    """Statics of all spliced frames, the regular-DNN input."""
    return select_view(base_dim, context, range(-context, context + 1))


def conv_view(base_dim, context):
    """Full mel x time x channel block for the CNN branch."""
    return InputView("conv_block", base_dim, context)


def rnn_window_view(base_dim, context, steps=6):
    """Statics of frames t..t+steps-1, the unfolded-RNN sliding window."""
    if steps - 1 > context:
        raise ConfigError(f"rnn window of {steps} frames exceeds context {context}")
    return select_view(base_dim, context, range(0, steps))


def dnn_spec(canonical_dim, view, hidden_dims, bottleneck, num_outputs,
             activation="sigmoid", embedding_dim=0):
    """Fully-connected stack with a linear bottleneck before the output."""
    dim = view.output_dim(canonical_dim) + embedding_dim
    layers = []
    for h in hidden_dims:
        layers.append(net.affine(dim, h))
        layers.append(LayerSpec(activation, h, h))
        dim = h
    layers.append(net.affine(dim, bottleneck))
    layers.append(net.softmax_output(bottleneck, num_outputs))
    return NetworkSpec(layers, view, embedding_dim)


def maxout_dnn_spec(canonical_dim, view, hidden_units, bottleneck, num_outputs,
                    group_size=2, embedding_dim=0):
    """Maxout stack; hidden_units are post-max unit counts per layer."""
    dim = view.output_dim(canonical_dim) + embedding_dim
    layers = []
    for units in hidden_units:
        layers.append(net.affine(dim, units * group_size))
        layers.append(net.maxout(units * group_size, group_size))
        dim = units
    layers.append(net.affine(dim, bottleneck))
    layers.append(net.softmax_output(bottleneck, num_outputs))
    return NetworkSpec(layers, view, embedding_dim)


def equalized_maxout_units(sigmoid_units, group_size=2):
    """Pre-max activation count that parameter-equalizes a sigmoid layer.

    sqrt(2) more neurons per hidden layer compensate the group max halving
    the outputs; rounded up to a multiple of the group size.
    """
    pre = math.ceil(math.sqrt(2.0) * sigmoid_units)
    if pre % group_size:
        pre += group_size - pre % group_size
    return pre


def maxout_twin_spec(canonical_dim, view, sigmoid_hidden_dims, bottleneck, num_outputs,
                     group_size=2, embedding_dim=0):
    """Maxout network parameter-equalized to a sigmoid DNN layout."""
    units = [equalized_maxout_units(n, group_size) // group_size for n in sigmoid_hidden_dims]
    return maxout_dnn_spec(
        canonical_dim, view, units, bottleneck, num_outputs, group_size, embedding_dim
    )


def cnn_spec(canonical_dim, view, filters=(16, 32), windows=((9, 9), (5, 1)),
             pool=(2, 2), hidden_dims=(128,), bottleneck=512, num_outputs=30,
             activation="sigmoid"):
    """Two convolutional layers, pooling after the first, then dense layers."""
    shape = view.block_shape()
    if view.output_dim(canonical_dim) != shape[0] * shape[1] * shape[2]:
        raise ConfigError("conv view geometry inconsistent")
    layers = [net.conv2d(shape, filters[0], *windows[0])]
    shape = layers[-1].out_shape
    layers.append(net.maxpool(shape, *pool))
    shape = layers[-1].out_shape
    layers.append(net.conv2d(shape, filters[1], *windows[1]))
    dim = layers[-1].output_dim
    for h in hidden_dims:
        layers.append(net.affine(dim, h))
        layers.append(LayerSpec(activation, h, h))
        dim = h
    layers.append(net.affine(dim, bottleneck))
    layers.append(net.softmax_output(bottleneck, num_outputs))
    return NetworkSpec(layers, view)


def rnn_spec(canonical_dim, view, steps, recurrent_hidden, hidden_dims,
             bottleneck, num_outputs):
    """Recurrent first layer unfolded over the window, then dense layers."""
    dim = view.output_dim(canonical_dim)
    layers = [net.recurrent_unfolded(dim, recurrent_hidden, steps)]
    prev = recurrent_hidden
    for h in hidden_dims:
        layers.append(net.affine(prev, h))
        layers.append(net.sigmoid(h))
        prev = h
    layers.append(net.affine(prev, bottleneck))
    layers.append(net.softmax_output(bottleneck, num_outputs))
    return NetworkSpec(layers, view)
