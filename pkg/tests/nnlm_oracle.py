"""Independent forward-pass reference for the neural LM.

Recomputes log10 p(word | history) from the model's raw parameter
arrays with plain Python loops and explicit formulas (stable sigmoid,
subtract-max softmax), sharing no code with the library's layer stack.
"""

import math


def _sigmoid(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def nnlm_logprob10_reference(model, history_words, word):
    vocab = model.vocab
    h = model.config.history
    ids = [vocab.bos_id] * h + [vocab.id(w) for w in history_words]
    ids = ids[-h:]

    emb = model.params["emb"]
    w1 = model.params["stack"][0]["W"]
    b1 = model.params["stack"][0]["b"]
    w2 = model.params["stack"][2]["W"]
    b2 = model.params["stack"][2]["b"]

    x = []
    for i in ids:
        x.extend(float(v) for v in emb[i])

    hidden = []
    for r in range(w1.shape[0]):
        z = float(b1[r]) + sum(float(w1[r, c]) * x[c] for c in range(len(x)))
        hidden.append(_sigmoid(z))

    logits = []
    for r in range(w2.shape[0]):
        z = float(b2[r]) + sum(
            float(w2[r, c]) * hidden[c] for c in range(len(hidden))
        )
        logits.append(z)

    m = max(logits)
    log_norm = m + math.log(sum(math.exp(z - m) for z in logits))
    return (logits[vocab.id(word)] - log_norm) / math.log(10.0)
