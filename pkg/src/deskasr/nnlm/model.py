"""Feedforward neural network language model over fixed history windows.

A shared embedding table maps each of the n-1 history words to a dense
vector; the concatenation feeds one sigmoid hidden layer and a softmax
over the full vocabulary. The model implements the trainable-model
protocol (minibatch_loss_and_grads / sgd_step / eval_loss_accuracy) so
the standard SGD driver trains it, and the n-gram scoring interface
(vocab / order / logprob_ids / token_logprobs) so mixtures and
rescoring treat it like any other language model.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import ConfigError, DataError, ShapeError
from ..lm.vocab import Vocab
from ..nn import network as net
from ..trainer import FrameDataset, TrainConfig, train

LN10 = math.log(10.0)


@dataclass(frozen=True)
class NnlmConfig:
    """Architecture and training hyperparameters of the neural LM."""

    history: int = 3  # words of context (n-1)
    embedding_dim: int = 16
    hidden_dim: int = 64
    vocab: Vocab = None  # resolved from the corpus when None
    epochs: int = 8
    lr: float = 0.1
    lr_decay: float = 0.8
    minibatch: int = 250
    seed: int = 0

    def __post_init__(self):
        if self.history < 1:
            raise ConfigError(f"history must be >= 1, got {self.history}")
        if self.embedding_dim < 1 or self.hidden_dim < 1:
            raise ConfigError("embedding_dim and hidden_dim must be >= 1")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")


def _glorot(rng, shape, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


class NnlmModel:
    """Embedding -> sigmoid hidden layer -> softmax over the vocabulary."""

    def __init__(self, config, params=None):
        if config.vocab is None:
            raise ConfigError("NnlmModel needs a resolved vocabulary")
        self.config = config
        self.vocab = config.vocab
        v = len(self.vocab)
        d, h = config.embedding_dim, config.hidden_dim
        concat = config.history * d
        self.layers = [
            net.affine(concat, h),
            net.sigmoid(h),
            net.softmax_output(h, v),
        ]
        if params is None:
            rng = np.random.default_rng(config.seed)
            params = {
                "emb": _glorot(rng, (v, d), v, d),
                "stack": [
                    {"W": _glorot(rng, (h, concat), concat, h),
                     "b": np.zeros(h)},
                    None,
                    {"W": _glorot(rng, (v, h), h, v), "b": np.zeros(v)},
                ],
            }
        self.params = params
        self.train_history = []  # per-epoch EpochStats, set by train_nnlm

    @property
    def order(self):
        return self.config.history + 1

    # --- forward / scoring ---------------------------------------------
    def _forward(self, ids, keep_caches=False):
        ids = np.asarray(ids)
        if ids.ndim != 2 or ids.shape[1] != self.config.history:
            raise ShapeError(
                f"context ids must be (rows, {self.config.history})"
            )
        ids = ids.astype(np.int64)
        b = ids.shape[0]
        x = self.params["emb"][ids].reshape(b, -1)
        return ids, net.stack_forward(
            self.layers, self.params["stack"], x, keep_caches=keep_caches
        )

    def log_posteriors(self, ids):
        """(rows, vocab) natural-log next-word distribution."""
        _, res = self._forward(ids)
        return res.out

    def _pad_context(self, history):
        h = self.config.history
        ctx = [self.vocab.bos_id] * h + [int(w) for w in history]
        return ctx[-h:]

    def logprob_ids(self, history, word):
        """Natural-log p(word | history ids); short histories <s>-padded."""
        row = np.array([self._pad_context(history)])
        return float(self.log_posteriors(row)[0, int(word)])

    def token_logprobs(self, sentences, oov_policy="score-unk"):
        """Per-token natural logprobs with the n-gram module's semantics:
        </s> is scored, <s> pads/conditions, OOV tokens map to <unk> and
        are scored or skipped but always advance the history."""
        if oov_policy not in ("score-unk", "skip"):
            raise ConfigError(f"unknown OOV policy {oov_policy!r}")
        h = self.config.history
        rows, targets, oov = [], [], 0
        for sent in sentences:
            ctx = [self.vocab.bos_id] * h
            for tok in list(sent) + [self.vocab.token(self.vocab.eos_id)]:
                is_oov = tok not in self.vocab
                wid = self.vocab.id(tok)
                if is_oov:
                    oov += 1
                if not (is_oov and oov_policy == "skip"):
                    rows.append(list(ctx))
                    targets.append(wid)
                ctx = ctx[1:] + [wid]
        if not rows:
            return np.array([]), oov
        log_post = self.log_posteriors(np.array(rows))
        return log_post[np.arange(len(targets)), targets], oov

    # --- trainable-model protocol --------------------------------------
    def minibatch_loss_and_grads(self, minibatch, dropout_rate=0.0, rng=None):
        ids, res = self._forward(minibatch.inputs, keep_caches=True)
        targets = minibatch.targets
        b = ids.shape[0]
        loss = net.cross_entropy(res.out, targets)
        gy = np.exp(res.out)
        gy[np.arange(b), targets] -= 1.0
        gy /= b
        gx, stack_grads = net.stack_backward(
            self.layers, self.params["stack"], res.caches, res.masks, gy
        )
        g_emb = np.zeros_like(self.params["emb"])
        np.add.at(
            g_emb, ids.ravel(),
            gx.reshape(-1, self.config.embedding_dim),
        )
        return loss, {"emb": g_emb, "stack": stack_grads}

    def sgd_step(self, grads, lr):
        self.params["emb"] -= lr * grads["emb"]
        for p, g in zip(self.params["stack"], grads["stack"]):
            if g is None:
                continue
            for key, grad in g.items():
                p[key] -= lr * grad

    def eval_loss_accuracy(self, minibatch):
        _, res = self._forward(minibatch.inputs)
        loss = net.cross_entropy(res.out, minibatch.targets)
        acc = float((res.out.argmax(axis=1) == minibatch.targets).mean())
        return loss, acc


def nnlm_dataset(sentences, vocab, history):
    """(context ids, next-word id) pairs for every word and </s>.

    Contexts shorter than the window are left-padded with <s>."""
    rows, targets = [], []
    for sent in sentences:
        ctx = [vocab.bos_id] * history
        for wid in vocab.encode(list(sent)) + [vocab.eos_id]:
            rows.append(list(ctx))
            targets.append(wid)
            ctx = ctx[1:] + [wid]
    if not rows:
        raise DataError("empty corpus: no training windows")
    return FrameDataset(np.array(rows, dtype=np.float64), np.array(targets))


def train_nnlm(sentences, config):
    """Train a feedforward neural LM with the standard SGD driver."""
    sentences = [list(s) for s in sentences]
    vocab = config.vocab
    if vocab is None:
        vocab = Vocab.from_corpus(sentences)
        config = replace(config, vocab=vocab)
    dataset = nnlm_dataset(sentences, vocab, config.history)
    model = NnlmModel(config)
    tc = TrainConfig(
        epochs=config.epochs,
        minibatch_frames=config.minibatch,
        lr0=config.lr,
        lr_decay=config.lr_decay,
        seed=config.seed,
    )
    model.train_history = train(model, dataset, tc)
    return model


def nnlm_logprob(model, history_words, word):
    """log10 p(word | history words); OOV words map to <unk>."""
    ids = [model.vocab.id(w) for w in history_words]
    return model.logprob_ids(ids, model.vocab.id(word)) / LN10


def save_nnlm(path, model):
    """Single-file npz snapshot of parameters, config, and vocabulary."""
    cfg = model.config
    np.savez(
        path,
        emb=model.params["emb"],
        w1=model.params["stack"][0]["W"],
        b1=model.params["stack"][0]["b"],
        w2=model.params["stack"][2]["W"],
        b2=model.params["stack"][2]["b"],
        tokens=np.array(model.vocab.tokens),
        scalars=np.array(
            [cfg.history, cfg.embedding_dim, cfg.hidden_dim, cfg.epochs,
             cfg.seed, cfg.minibatch], dtype=np.int64
        ),
        floats=np.array([cfg.lr, cfg.lr_decay]),
    )


def load_nnlm(path):
    with np.load(path, allow_pickle=False) as z:
        history, emb_dim, hidden, epochs, seed, minibatch = (
            int(x) for x in z["scalars"]
        )
        lr, lr_decay = (float(x) for x in z["floats"])
        vocab = Vocab(str(t) for t in z["tokens"])
        config = NnlmConfig(
            history=history, embedding_dim=emb_dim, hidden_dim=hidden,
            vocab=vocab, epochs=epochs, lr=lr, lr_decay=lr_decay,
            minibatch=minibatch, seed=seed,
        )
        params = {
            "emb": z["emb"],
            "stack": [
                {"W": z["w1"], "b": z["b1"]},
                None,
                {"W": z["w2"], "b": z["b2"]},
            ],
        }
    return NnlmModel(config, params)
