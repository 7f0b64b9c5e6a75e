"""Layered network description, parameters, forward evaluation, backprop."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, NumericsError, ShapeError
from . import layers

KINDS = (
    "affine",
    "sigmoid",
    "relu",
    "maxout",
    "conv2d",
    "maxpool",
    "recurrent_unfolded",
    "softmax_output",
)

PARAM_KINDS = ("affine", "conv2d", "recurrent_unfolded", "softmax_output")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    input_dim: int
    output_dim: int
    group_size: int = 0          # maxout
    num_filters: int = 0         # conv2d
    window: tuple = ()           # conv2d (h, w)
    stride: int = 1              # conv2d
    pool: tuple = ()             # maxpool (h, w)
    steps: int = 0               # recurrent_unfolded
    in_shape: tuple = ()         # conv2d / maxpool input geometry (H, W, C)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        if self.input_dim < 1 or self.output_dim < 1:
            raise ShapeError("layer dims must be positive")
        if self.kind == "maxout":
            if self.group_size < 1:
                raise ConfigError("maxout needs group_size >= 1")
            if self.input_dim % self.group_size != 0:
                raise ShapeError(
                    f"maxout input {self.input_dim} not divisible by group {self.group_size}"
                )
            if self.output_dim != self.input_dim // self.group_size:
                raise ShapeError("maxout output_dim must be input_dim / group_size")
        if self.kind in ("sigmoid", "relu") and self.input_dim != self.output_dim:
            raise ShapeError(f"{self.kind} must preserve dimension")
        if self.kind == "conv2d":
            h, w, c = self.in_shape
            if h * w * c != self.input_dim:
                raise ShapeError("conv2d in_shape does not match input_dim")
            kh, kw = self.window
            if kh > h or kw > w:
                raise ShapeError(f"window {kh}x{kw} larger than input {h}x{w}")
            if self.output_dim != self.out_shape[0] * self.out_shape[1] * self.num_filters:
                raise ShapeError("conv2d output_dim inconsistent with geometry")
        if self.kind == "maxpool":
            h, w, c = self.in_shape
            if h * w * c != self.input_dim:
                raise ShapeError("maxpool in_shape does not match input_dim")
            if self.output_dim != self.out_shape[0] * self.out_shape[1] * c:
                raise ShapeError("maxpool output_dim inconsistent with geometry")
        if self.kind == "recurrent_unfolded":
            if self.steps < 1:
                raise ConfigError("recurrent_unfolded needs steps >= 1")
            if self.input_dim % self.steps != 0:
                raise ShapeError("recurrent input_dim must be divisible by steps")

    @property
    def out_shape(self):
        """Spatial output geometry for conv2d/maxpool layers."""
        h, w, c = self.in_shape
        if self.kind == "conv2d":
            kh, kw = self.window
            return (
                (h - kh) // self.stride + 1,
                (w - kw) // self.stride + 1,
                self.num_filters,
            )
        if self.kind == "maxpool":
            ph, pw = self.pool
            return (h // ph, w // pw, c)
        raise ConfigError(f"{self.kind} has no spatial shape")

    def param_count(self):
        if self.kind in ("affine", "softmax_output"):
            return self.output_dim * (self.input_dim + 1)
        if self.kind == "conv2d":
            kh, kw = self.window
            return self.num_filters * (kh * kw * self.in_shape[2] + 1)
        if self.kind == "recurrent_unfolded":
            frame_dim = self.input_dim // self.steps
            h = self.output_dim
            return h * frame_dim + h * h + h
        return 0


def affine(input_dim, output_dim):
    return LayerSpec("affine", input_dim, output_dim)


def sigmoid(dim):
    return LayerSpec("sigmoid", dim, dim)


def relu(dim):
    return LayerSpec("relu", dim, dim)


def maxout(input_dim, group_size):
    return LayerSpec("maxout", input_dim, input_dim // group_size, group_size=group_size)


def conv2d(in_shape, num_filters, window_h, window_w, stride=1):
    h, w, c = in_shape
    spec = LayerSpec(
        "conv2d",
        h * w * c,
        ((h - window_h) // stride + 1) * ((w - window_w) // stride + 1) * num_filters,
        num_filters=num_filters,
        window=(window_h, window_w),
        stride=stride,
        in_shape=tuple(in_shape),
    )
    return spec


def maxpool(in_shape, pool_h, pool_w):
    h, w, c = in_shape
    return LayerSpec(
        "maxpool",
        h * w * c,
        (h // pool_h) * (w // pool_w) * c,
        pool=(pool_h, pool_w),
        in_shape=tuple(in_shape),
    )


def recurrent_unfolded(input_dim, hidden_dim, steps):
    return LayerSpec("recurrent_unfolded", input_dim, hidden_dim, steps=steps)


def softmax_output(input_dim, num_outputs):
    return LayerSpec("softmax_output", input_dim, num_outputs)


VIEW_KINDS = ("identity", "select", "conv_block")


@dataclass(frozen=True)
class InputView:
    """Materializes a member network's input from the canonical frame row.

    The canonical row is a splice of delta-augmented frames: for context K
    and base dim D, frames t-K..t+K each contribute [static, delta,
    delta-delta] (3*D values), giving a (2K+1)*3*D row.

    select: keep `components` (0=static, 1=delta, 2=delta-delta) of the
    frames at relative offsets `frames`, in that order.
    conv_block: reorder the full row into an (D, 2K+1, 3) mel x time x
    channel block, row-major.
    """

    kind: str = "identity"
    base_dim: int = 0
    context: int = 0
    frames: tuple = ()
    components: tuple = ()

    def __post_init__(self):
        if self.kind not in VIEW_KINDS:
            raise ConfigError(f"unknown view kind {self.kind!r}")
        if self.kind != "identity":
            object.__setattr__(self, "frames", tuple(int(f) for f in self.frames))
            object.__setattr__(self, "components", tuple(int(c) for c in self.components))
            for f in self.frames:
                if abs(f) > self.context:
                    raise ConfigError(f"frame offset {f} outside context {self.context}")

    def columns(self, canonical_dim):
        """Column gather indices into the canonical row."""
        d, k = self.base_dim, self.context
        if self.kind == "identity":
            return np.arange(canonical_dim)
        if (2 * k + 1) * 3 * d != canonical_dim:
            raise ShapeError(
                f"canonical dim {canonical_dim} does not match view base {d} context {k}"
            )
        if self.kind == "select":
            cols = []
            for f in self.frames:
                base = (f + k) * 3 * d
                for c in self.components:
                    cols.extend(range(base + c * d, base + (c + 1) * d))
            return np.asarray(cols)
        # conv_block: out[h, w, c] = row[w*3d + c*d + h]
        h_idx = np.arange(d)[:, None, None]
        w_idx = np.arange(2 * k + 1)[None, :, None]
        c_idx = np.arange(3)[None, None, :]
        return (w_idx * 3 * d + c_idx * d + h_idx).reshape(-1)

    def output_dim(self, canonical_dim):
        return len(self.columns(canonical_dim))

    def block_shape(self):
        if self.kind != "conv_block":
            raise ConfigError("block_shape only defined for conv_block views")
        return (self.base_dim, 2 * self.context + 1, 3)

    def apply(self, x):
        if self.kind == "identity":
            return x
        return np.ascontiguousarray(x[:, self.columns(x.shape[1])])


IDENTITY_VIEW = InputView()


@dataclass
class NetworkSpec:
    layers: list
    view: InputView = field(default_factory=InputView)
    embedding_dim: int = 0

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.output_dim != b.input_dim:
                raise ShapeError(
                    f"dim mismatch: {a.kind}({a.output_dim}) feeds {b.kind}({b.input_dim})"
                )
        outputs = [i for i, l in enumerate(self.layers) if l.kind == "softmax_output"]
        if outputs != [len(self.layers) - 1]:
            raise ConfigError("exactly one softmax_output layer required, in last position")

    @property
    def input_dim(self):
        return self.layers[0].input_dim

    @property
    def num_outputs(self):
        return self.layers[-1].output_dim

    def param_count(self):
        return sum(l.param_count() for l in self.layers)

    def hidden_param_layers(self):
        """Indices of parameterized layers excluding the output layer."""
        return [
            i
            for i, l in enumerate(self.layers[:-1])
            if l.kind in ("affine", "conv2d", "recurrent_unfolded")
        ]


@dataclass
class Minibatch:
    inputs: np.ndarray
    targets: np.ndarray = None  # optional for decode-time forward passes
    speaker_embedding: np.ndarray = None

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        if self.inputs.ndim != 2 or self.inputs.shape[0] < 1:
            raise ShapeError("minibatch inputs must be a non-empty N x D matrix")
        if self.targets is not None:
            self.targets = np.asarray(self.targets, dtype=np.int64)
            if self.targets.shape != (self.inputs.shape[0],):
                raise ShapeError("one target per frame required")
            if np.any(self.targets < 0):
                raise ShapeError("negative target state id")


def init_params(spec, seed=0):
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases, seeded."""
    rng = np.random.default_rng(seed)
    params = []
    for layer in spec.layers:
        params.append(_init_layer(layer, rng))
    return params


def _init_layer(layer, rng):
    def glorot(shape, fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=shape)

    if layer.kind in ("affine", "softmax_output"):
        return {
            "W": glorot((layer.output_dim, layer.input_dim), layer.input_dim, layer.output_dim),
            "b": np.zeros(layer.output_dim),
        }
    if layer.kind == "conv2d":
        kh, kw = layer.window
        c = layer.in_shape[2]
        return {
            "W": glorot((layer.num_filters, kh, kw, c), kh * kw * c, layer.num_filters),
            "b": np.zeros(layer.num_filters),
        }
    if layer.kind == "recurrent_unfolded":
        frame_dim = layer.input_dim // layer.steps
        h = layer.output_dim
        return {
            "W": glorot((h, frame_dim), frame_dim, h),
            "b": np.zeros(h),
            "U": glorot((h, h), h, h),
        }
    return None


def check_params(spec, params):
    if len(params) != len(spec.layers):
        raise ShapeError("one param entry per layer required")
    for layer, p in zip(spec.layers, params):
        if layer.kind in PARAM_KINDS:
            if p is None or not np.all(np.isfinite(p["W"])):
                raise NumericsError(f"non-finite weights in {layer.kind} layer")


@dataclass
class ForwardResult:
    activations: list
    logits: np.ndarray
    log_posteriors: np.ndarray
    caches: list = None
    dropout_masks: dict = None


def materialize_input(view, embedding_dim, expected_dim, minibatch):
    """Apply a view to the canonical rows and append any speaker embedding."""
    x = view.apply(minibatch.inputs)
    if embedding_dim:
        emb = minibatch.speaker_embedding
        if emb is None:
            raise ShapeError("network expects a speaker embedding, minibatch has none")
        emb = np.asarray(emb, dtype=np.float64)
        if emb.shape != (embedding_dim,):
            raise ShapeError(
                f"speaker embedding dim {emb.shape} != configured {embedding_dim}"
            )
        x = np.hstack([x, np.tile(emb, (x.shape[0], 1))])
    if x.shape[1] != expected_dim:
        raise ShapeError(f"input dim {x.shape[1]} does not match network {expected_dim}")
    return x


@dataclass
class StackResult:
    out: np.ndarray
    activations: list
    caches: list
    masks: dict
    logits: np.ndarray


def stack_forward(layer_seq, params, x, rate=0.0, rng=None, keep_caches=False):
    """Forward pass through a bare layer sequence.

    Dropout (when rate > 0) applies after hidden maxout layers only.
    The joint fused model runs its headless branches through this too.
    """
    activations = []
    caches = [] if keep_caches else None
    masks = {} if keep_caches else None
    logits = None
    for i, (layer, p) in enumerate(zip(layer_seq, params)):
        if x.shape[1] != layer.input_dim:
            raise ShapeError(f"layer {i} ({layer.kind}) expected dim {layer.input_dim}")
        x, cache = _layer_forward(layer, p, x)
        if layer.kind == "softmax_output":
            logits = cache[1]
        if layer.kind == "maxout" and rate > 0.0:
            mask = layers.dropout_mask(x.shape, rate, rng)
            x = x * mask
            if keep_caches:
                masks[i] = mask
        if not np.all(np.isfinite(x)):
            raise NumericsError(f"non-finite activation after layer {i} ({layer.kind})")
        activations.append(x)
        if keep_caches:
            caches.append(cache)
    return StackResult(x, activations, caches, masks, logits)


def stack_backward(layer_seq, params, caches, masks, gy):
    """Backward pass mirroring stack_forward; returns (input grad, grads)."""
    grads = [None] * len(layer_seq)
    for i in range(len(layer_seq) - 1, -1, -1):
        if i in (masks or {}):
            gy = gy * masks[i]
        gy, grads[i] = _layer_backward(layer_seq[i], params[i], caches[i], gy)
    return gy, grads


def network_forward(spec, params, minibatch, mode="eval", dropout=None, keep_caches=False):
    """Run the network; returns per-layer activations, logits, log posteriors.

    dropout: (rate, rng) applied after hidden maxout layers in train mode.
    """
    if mode not in ("train", "eval"):
        raise ConfigError(f"mode must be train or eval, got {mode!r}")
    rate, rng = (0.0, None)
    if mode == "train" and dropout is not None:
        rate, rng = dropout
    x = materialize_input(spec.view, spec.embedding_dim, spec.input_dim, minibatch)
    if minibatch.targets is not None and np.any(minibatch.targets >= spec.num_outputs):
        raise ShapeError("target id outside output inventory")
    res = stack_forward(spec.layers, params, x, rate, rng, keep_caches)
    return ForwardResult(res.activations, res.logits, res.out, res.caches, res.masks)


def _layer_forward(layer, p, x):
    if layer.kind == "affine":
        return layers.affine_batch_forward(x, p["W"], p["b"])
    if layer.kind == "sigmoid":
        return layers.sigmoid_batch_forward(x)
    if layer.kind == "relu":
        return layers.relu_batch_forward(x)
    if layer.kind == "maxout":
        return layers.maxout_batch_forward(x, layer.group_size)
    if layer.kind == "conv2d":
        return layers.conv2d_batch_forward(x, layer.in_shape, p["W"], p["b"], layer.stride)
    if layer.kind == "maxpool":
        return layers.maxpool_batch_forward(x, layer.in_shape, *layer.pool)
    if layer.kind == "recurrent_unfolded":
        return layers.recurrent_batch_forward(x, layer.steps, p["W"], p["U"], p["b"])
    if layer.kind == "softmax_output":
        logits, cache = layers.affine_batch_forward(x, p["W"], p["b"])
        return layers.log_softmax(logits), (cache, logits)
    raise ConfigError(f"unknown layer kind {layer.kind!r}")


def cross_entropy(log_posteriors, targets):
    n = log_posteriors.shape[0]
    return float(-log_posteriors[np.arange(n), targets].mean())


def backprop(spec, params, minibatch, dropout=None):
    """Gradients of mean cross-entropy over the minibatch.

    Returns (grads, loss); grads align with spec.layers, None for layers
    without parameters. Deterministic given the dropout rng.
    """
    fwd = network_forward(
        spec, params, minibatch, mode="train", dropout=dropout, keep_caches=True
    )
    n = minibatch.inputs.shape[0]
    loss = cross_entropy(fwd.log_posteriors, minibatch.targets)
    posterior = np.exp(fwd.log_posteriors)
    posterior[np.arange(n), minibatch.targets] -= 1.0
    gy = posterior / n
    _, grads = stack_backward(spec.layers, params, fwd.caches, fwd.dropout_masks, gy)
    return grads, loss


def _layer_backward(layer, p, cache, gy):
    if layer.kind == "affine":
        return layers.affine_batch_backward(gy, p["W"], cache)
    if layer.kind == "sigmoid":
        return layers.sigmoid_batch_backward(gy, cache)
    if layer.kind == "relu":
        return layers.relu_batch_backward(gy, cache)
    if layer.kind == "maxout":
        return layers.maxout_batch_backward(gy, layer.group_size, cache)
    if layer.kind == "conv2d":
        return layers.conv2d_batch_backward(gy, p["W"], layer.stride, cache)
    if layer.kind == "maxpool":
        return layers.maxpool_batch_backward(gy, cache)
    if layer.kind == "recurrent_unfolded":
        return layers.recurrent_batch_backward(gy, p["W"], p["U"], cache)
    if layer.kind == "softmax_output":
        affine_cache, _ = cache
        return layers.affine_batch_backward(gy, p["W"], affine_cache)
    raise ConfigError(f"unknown layer kind {layer.kind!r}")


class Network:
    """A spec plus its parameters; the unit the trainer and fusion consume."""

    def __init__(self, spec, params=None, seed=0):
        self.spec = spec
        self.params = params if params is not None else init_params(spec, seed)

    @property
    def num_outputs(self):
        return self.spec.num_outputs

    def forward(self, minibatch, mode="eval", dropout=None):
        return network_forward(self.spec, self.params, minibatch, mode, dropout)

    def log_posteriors(self, minibatch):
        return self.forward(minibatch).log_posteriors

    def logits(self, minibatch):
        return self.forward(minibatch).logits

    # --- trainable-model protocol -------------------------------------
    def minibatch_loss_and_grads(self, minibatch, dropout_rate=0.0, rng=None):
        dropout = (dropout_rate, rng) if dropout_rate > 0.0 else None
        grads, loss = backprop(self.spec, self.params, minibatch, dropout)
        return loss, grads

    def sgd_step(self, grads, lr):
        for p, g in zip(self.params, grads):
            if g is None:
                continue
            for key, grad in g.items():
                p[key] -= lr * grad

    def eval_loss_accuracy(self, minibatch):
        log_post = self.log_posteriors(minibatch)
        loss = cross_entropy(log_post, minibatch.targets)
        acc = float((log_post.argmax(axis=1) == minibatch.targets).mean())
        return loss, acc

    def copy(self):
        return Network(self.spec, [_copy_params(p) for p in self.params])


def _copy_params(p):
    if p is None:
        return None
    return {k: v.copy() for k, v in p.items()}
