"""ARPA backoff-model text format.

Log10 in the file, natural logs in memory. Backoff weights are written
for every n-gram below the top order; the reader also accepts lines
that omit the backoff column (implied weight 1). <s> carries the
conventional -99 unigram log10 probability.
"""

import math
import re

from ..errors import ParseError
from .model import NGramModel
from .vocab import Vocab

LN10 = math.log(10.0)


def arpa_write(model, path):
    with open(path, "w") as fh:
        fh.write("\\data\\\n")
        for k in range(1, model.order + 1):
            fh.write(f"ngram {k}={model.ngram_count(k)}\n")
        for k in range(1, model.order + 1):
            fh.write(f"\n\\{k}-grams:\n")
            for gram in sorted(model.probs[k - 1]):
                lp10 = model.probs[k - 1][gram] / LN10
                toks = " ".join(model.vocab.token(i) for i in gram)
                line = f"{lp10:.7f}\t{toks}"
                if k < model.order:
                    bow10 = model.bows[k - 1].get(gram, 0.0) / LN10
                    line += f"\t{bow10:.7f}"
                fh.write(line + "\n")
        fh.write("\n\\end\\\n")


def arpa_read(path):
    with open(path) as fh:
        lines = fh.read().splitlines()

    def fail(lineno, msg):
        raise ParseError(f"{path}:{lineno}: {msg}")

    counts = {}
    order = 0
    i = 0
    n = len(lines)
    while i < n and lines[i].strip() != "\\data\\":
        if lines[i].strip():
            fail(i + 1, "expected \\data\\ header")
        i += 1
    if i == n:
        raise ParseError(f"{path}: missing \\data\\ header")
    i += 1
    while i < n and lines[i].strip():
        m = re.fullmatch(r"ngram\s+(\d+)\s*=\s*(\d+)", lines[i].strip())
        if not m:
            fail(i + 1, f"bad count line {lines[i].strip()!r}")
        counts[int(m.group(1))] = int(m.group(2))
        order = max(order, int(m.group(1)))
        i += 1
    if order < 1 or sorted(counts) != list(range(1, order + 1)):
        raise ParseError(f"{path}: \\data\\ must list orders 1..n")

    raw = {k: [] for k in range(1, order + 1)}
    section = None
    end_seen = False
    for lineno in range(i, n):
        line = lines[lineno].strip()
        if not line:
            continue
        m = re.fullmatch(r"\\(\d+)-grams:", line)
        if m:
            section = int(m.group(1))
            if section not in counts:
                fail(lineno + 1, f"unexpected section {line!r}")
            continue
        if line == "\\end\\":
            end_seen = True
            section = None
            continue
        if end_seen:
            fail(lineno + 1, "content after \\end\\")
        if section is None:
            fail(lineno + 1, f"line outside any section: {line!r}")
        parts = line.split()
        has_bow = len(parts) == section + 2
        if not (has_bow or len(parts) == section + 1):
            fail(lineno + 1,
                 f"expected {section + 1} or {section + 2} fields")
        if section == order and has_bow:
            fail(lineno + 1, "backoff weight on highest order")
        try:
            lp10 = float(parts[0])
            bow10 = float(parts[-1]) if has_bow else 0.0
        except ValueError:
            fail(lineno + 1, "bad numeric field")
        raw[section].append(
            (lineno + 1, lp10, tuple(parts[1 : section + 1]),
             bow10 if has_bow else None)
        )
    if not end_seen:
        raise ParseError(f"{path}: missing \\end\\")
    for k in range(1, order + 1):
        if len(raw[k]) != counts[k]:
            raise ParseError(
                f"{path}: \\{k}-grams: header says {counts[k]}, "
                f"body has {len(raw[k])}"
            )

    vocab = Vocab(tok for _, _, toks, _ in raw[1] for tok in toks)
    known = set(vocab.tokens)
    probs = [dict() for _ in range(order)]
    bows = [dict() for _ in range(order - 1)]
    for k in range(1, order + 1):
        for lineno, lp10, toks, bow10 in raw[k]:
            for tok in toks:
                if tok not in known:
                    fail(lineno, f"token {tok!r} not in the unigram list")
            gram = tuple(vocab.id(t) for t in toks)
            probs[k - 1][gram] = lp10 * LN10
            if bow10 is not None and k < order:
                bows[k - 1][gram] = bow10 * LN10
    return NGramModel(vocab, order, probs, bows)
