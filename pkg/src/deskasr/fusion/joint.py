"""Score fusion of member networks and the fused joint model.

Fusion sums the members' pre-softmax outputs. The joint model folds that
sum into a single network: each member contributes its layers up to the
linear bottleneck as a branch, and one shared output layer holds the
horizontal concatenation of the members' bottleneck-to-output matrices
(scaled by the fusion weights) with the weighted sum of their biases.
By construction the joint logits equal the fused member logits, and the
whole thing remains trainable by the standard SGD driver.

Container layout (little-endian, magic "JNET", version 1):

    magic     4 bytes  b"JNET"
    version   u32
    num_outputs u32
    nbranches u32
    weights   f64[nbranches]
    per branch: embedding_dim u32, view record, nlayers u32,
                layer records          (records as in the "NNET" container)
    payload:  per branch, its layer parameter arrays (row-major f64),
              then the shared output W (num_outputs x sum of bottleneck
              dims) and bias b
"""

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ParseError, ShapeError
from ..nn.io import (
    pack_layer_record,
    pack_params,
    pack_view,
    unpack_layer_record,
    unpack_params,
    unpack_view,
)
from ..nn.layers import log_softmax
from ..nn.network import (
    cross_entropy,
    materialize_input,
    stack_backward,
    stack_forward,
)

JNET_MAGIC = b"JNET"
JNET_VERSION = 1


def _check_weights(weights, n, positive=True):
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ConfigError(f"need one weight per member, got {w.shape} for {n}")
    if positive and np.any(w <= 0):
        raise ConfigError("fusion weights must all be positive")
    if not positive and np.any(w < 0):
        raise ConfigError("fusion weights must be non-negative")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ConfigError(f"fusion weights must sum to 1, got {w.sum()}")
    return w


def score_fuse(logits_list, weights=None):
    """Element-wise weighted sum of pre-softmax outputs (uniform default).

    Zero weights are allowed here (they switch a member off); persistent
    fusion configs require strictly positive weights.
    """
    if len(logits_list) == 0:
        raise ConfigError("nothing to fuse")
    mats = [np.asarray(m, dtype=np.float64) for m in logits_list]
    shape = mats[0].shape
    for m in mats[1:]:
        if m.shape != shape:
            raise ShapeError(f"logit shapes differ: {shape} vs {m.shape}")
    w = _check_weights(weights, len(mats), positive=False)
    fused = np.zeros(shape)
    for wi, m in zip(w, mats):
        fused += wi * m
    return fused


@dataclass
class FusionSpec:
    """Member models plus fusion weights; members share one output inventory."""

    members: list
    weights: np.ndarray = None

    def __post_init__(self):
        if len(self.members) < 2:
            raise ConfigError("fusion needs at least 2 members")
        outs = {m.num_outputs for m in self.members}
        if len(outs) != 1:
            raise ConfigError(f"members disagree on output inventory: {sorted(outs)}")
        self.weights = _check_weights(self.weights, len(self.members))

    def fused_logits(self, minibatch):
        return score_fuse([m.logits(minibatch) for m in self.members], self.weights)

    def fused_log_posteriors(self, minibatch):
        return log_softmax(self.fused_logits(minibatch))


@dataclass
class JointBranch:
    """One member's layers up to (and including) its linear bottleneck."""

    layers: list
    view: object
    embedding_dim: int
    params: list

    @property
    def bottleneck_dim(self):
        return self.layers[-1].output_dim

    def copy_params(self):
        return [
            None if p is None else {k: v.copy() for k, v in p.items()}
            for p in self.params
        ]


class JointModel:
    """Branches feeding one shared output layer; SGD-trainable as a unit."""

    def __init__(self, branches, out_w, out_b, weights):
        self.branches = branches
        self.out_w = np.asarray(out_w, dtype=np.float64)
        self.out_b = np.asarray(out_b, dtype=np.float64)
        self.weights = np.asarray(weights, dtype=np.float64)
        total = sum(b.bottleneck_dim for b in branches)
        if self.out_w.shape[1] != total:
            raise ShapeError(
                f"shared output expects {self.out_w.shape[1]} inputs, branches "
                f"supply {total}"
            )

    @property
    def num_outputs(self):
        return self.out_w.shape[0]

    def _branch_outputs(self, minibatch, rate=0.0, rng=None, keep_caches=False):
        results = []
        for br in self.branches:
            x = materialize_input(
                br.view, br.embedding_dim, br.layers[0].input_dim, minibatch
            )
            results.append(
                stack_forward(br.layers, br.params, x, rate, rng, keep_caches)
            )
        return results

    def forward(self, minibatch, mode="eval", dropout=None, keep_caches=False):
        rate, rng = (0.0, None)
        if mode == "train" and dropout is not None:
            rate, rng = dropout
        results = self._branch_outputs(minibatch, rate, rng, keep_caches)
        z = np.hstack([r.out for r in results])
        logits = z @ self.out_w.T + self.out_b
        return results, z, logits, log_softmax(logits)

    def logits(self, minibatch):
        return self.forward(minibatch)[2]

    def log_posteriors(self, minibatch):
        return self.forward(minibatch)[3]

    # --- trainable-model protocol -------------------------------------
    def minibatch_loss_and_grads(self, minibatch, dropout_rate=0.0, rng=None):
        dropout = (dropout_rate, rng) if dropout_rate > 0.0 else None
        results, z, _, log_post = self.forward(
            minibatch, mode="train", dropout=dropout, keep_caches=True
        )
        n = minibatch.inputs.shape[0]
        loss = cross_entropy(log_post, minibatch.targets)
        gy = np.exp(log_post)
        gy[np.arange(n), minibatch.targets] -= 1.0
        gy /= n
        out_grads = {"W": gy.T @ z, "b": gy.sum(axis=0)}
        gz = gy @ self.out_w
        branch_grads = []
        col = 0
        for br, res in zip(self.branches, results):
            width = br.bottleneck_dim
            _, grads = stack_backward(
                br.layers, br.params, res.caches, res.masks,
                gz[:, col : col + width],
            )
            branch_grads.append(grads)
            col += width
        return loss, (branch_grads, out_grads)

    def sgd_step(self, grads, lr):
        branch_grads, out_grads = grads
        for br, glist in zip(self.branches, branch_grads):
            for p, g in zip(br.params, glist):
                if g is None:
                    continue
                for key, grad in g.items():
                    p[key] -= lr * grad
        self.out_w -= lr * out_grads["W"]
        self.out_b -= lr * out_grads["b"]

    def eval_loss_accuracy(self, minibatch):
        log_post = self.log_posteriors(minibatch)
        loss = cross_entropy(log_post, minibatch.targets)
        acc = float((log_post.argmax(axis=1) == minibatch.targets).mean())
        return loss, acc

    def copy(self):
        return JointModel(
            [
                JointBranch(list(b.layers), b.view, b.embedding_dim, b.copy_params())
                for b in self.branches
            ],
            self.out_w.copy(),
            self.out_b.copy(),
            self.weights.copy(),
        )


def build_joint(members, weights=None):
    """Fold member networks into one joint model equivalent to score fusion.

    Each member must end with a linear bottleneck feeding its output
    layer; the shared output concatenates the scaled member output
    matrices and sums the scaled biases.
    """
    if len(members) < 2:
        raise ConfigError("joint construction needs at least 2 members")
    w = _check_weights(weights, len(members))
    outs = {m.num_outputs for m in members}
    if len(outs) != 1:
        raise ConfigError(f"members disagree on output inventory: {sorted(outs)}")
    branches = []
    for m in members:
        layers = m.spec.layers
        if len(layers) < 2 or layers[-2].kind != "affine":
            raise ConfigError(
                "member lacks a linear bottleneck before its output layer"
            )
        branch_params = [
            None if p is None else {k: v.copy() for k, v in p.items()}
            for p in m.params[:-1]
        ]
        branches.append(
            JointBranch(list(layers[:-1]), m.spec.view, m.spec.embedding_dim,
                        branch_params)
        )
    out_w = np.hstack([wi * m.params[-1]["W"] for wi, m in zip(w, members)])
    out_b = sum(wi * m.params[-1]["b"] for wi, m in zip(w, members))
    return JointModel(branches, out_w, out_b, w)


def retrain_joint(joint, dataset, config):
    """Cross-entropy retraining of a joint model; returns (model, history)."""
    from ..trainer import train

    history = train(joint, dataset, config)
    return joint, history


def save_joint(path, joint):
    blob = JNET_MAGIC + struct.pack(
        "<III", JNET_VERSION, joint.num_outputs, len(joint.branches)
    )
    blob += np.ascontiguousarray(joint.weights, dtype="<f8").tobytes()
    for br in joint.branches:
        blob += struct.pack("<I", br.embedding_dim)
        blob += pack_view(br.view)
        blob += struct.pack("<I", len(br.layers))
        for layer in br.layers:
            blob += pack_layer_record(layer)
    for br in joint.branches:
        blob += pack_params(br.layers, br.params)
    blob += np.ascontiguousarray(joint.out_w, dtype="<f8").tobytes()
    blob += np.ascontiguousarray(joint.out_b, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(blob)


def load_joint(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != JNET_MAGIC:
        raise ParseError(f"{path}: bad magic {buf[:4]!r}, expected {JNET_MAGIC!r}")
    try:
        version, num_outputs, nbranches = struct.unpack_from("<III", buf, 4)
        if version != JNET_VERSION:
            raise ParseError(f"{path}: unsupported container version {version}")
        off = 16
        weights = np.frombuffer(buf, dtype="<f8", count=nbranches, offset=off).copy()
        off += 8 * nbranches
        shells = []
        for _ in range(nbranches):
            (embedding_dim,) = struct.unpack_from("<I", buf, off)
            off += 4
            view, off = unpack_view(buf, off)
            (nlayers,) = struct.unpack_from("<I", buf, off)
            off += 4
            layers = []
            for _ in range(nlayers):
                layer, off = unpack_layer_record(buf, off)
                layers.append(layer)
            shells.append((layers, view, embedding_dim))
        branches = []
        for layers, view, embedding_dim in shells:
            params, off = unpack_params(layers, buf, off)
            branches.append(JointBranch(layers, view, embedding_dim, params))
        total = sum(b.bottleneck_dim for b in branches)
        need = 8 * (num_outputs * total + num_outputs)
        if off + need > len(buf):
            raise ParseError(f"{path}: truncated shared-output payload")
        out_w = (
            np.frombuffer(buf, dtype="<f8", count=num_outputs * total, offset=off)
            .reshape(num_outputs, total)
            .copy()
        )
        off += 8 * num_outputs * total
        out_b = np.frombuffer(buf, dtype="<f8", count=num_outputs, offset=off).copy()
        off += 8 * num_outputs
    except struct.error as exc:
        raise ParseError(f"{path}: truncated container ({exc})") from exc
    if off != len(buf):
        raise ParseError(f"{path}: {len(buf) - off} trailing bytes")
    return JointModel(branches, out_w, out_b, weights)
