"""On-disk layouts used by the command line: corpus directories and the
plain-text sentence / transcript formats.

A corpus directory holds one feature file per utterance plus shared
metadata::

    <dir>/topology.txt        word-loop decoding graph
    <dir>/alignments.txt      `utt_id T state_1 ... state_T` per line
    <dir>/refs.txt            `utt_id w1 w2 ...` per line
    <dir>/features/<utt>.feat FEAT binary frames

Transcript files (`refs.txt`, hypothesis files) carry one utterance per
line; sentence files for language modelling are the same without the
leading id.
"""

import os

from ..am import SynthCorpus, read_topology, write_topology
from ..am.synth import Utterance
from ..errors import DataError, ParseError
from ..features import (
    read_alignments,
    read_features,
    write_alignments,
    write_features,
)


def write_sentences(path, sentences):
    """One whitespace-joined sentence per line."""
    with open(path, "w") as fh:
        for words in sentences:
            fh.write(" ".join(words) + "\n")


def read_sentences(path):
    out = []
    with open(path) as fh:
        for line in fh:
            words = line.split()
            if words:
                out.append(words)
    if not out:
        raise ParseError(f"{path}: no sentences found")
    return out


def write_transcripts(path, pairs):
    """pairs: iterable of (utt_id, word list)."""
    with open(path, "w") as fh:
        for utt_id, words in pairs:
            fh.write(f"{utt_id} {' '.join(words)}\n")


def read_transcripts(path):
    """Returns a dict utt_id -> word list, preserving file order."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise ParseError(
                    f"{path}:{lineno}: expected `utt_id w1 ...`"
                )
            if parts[0] in out:
                raise ParseError(
                    f"{path}:{lineno}: duplicate utterance id {parts[0]!r}"
                )
            out[parts[0]] = parts[1:]
    if not out:
        raise ParseError(f"{path}: no transcripts found")
    return out


def write_corpus_dir(path, corpus):
    """Persist utterance features, alignments, references, and topology."""
    if not corpus.utterances:
        raise DataError("corpus has no utterances")
    os.makedirs(os.path.join(path, "features"), exist_ok=True)
    write_topology(os.path.join(path, "topology.txt"), corpus.topology)
    write_alignments(os.path.join(path, "alignments.txt"), corpus.alignments())
    write_transcripts(os.path.join(path, "refs.txt"), corpus.references())
    for utt in corpus.utterances:
        write_features(
            os.path.join(path, "features", f"{utt.utt_id}.feat"),
            utt.features,
        )


def load_corpus_dir(path):
    """Rebuild a corpus from disk.

    The returned object carries no generative model (`config` and
    `model` are None): everything an on-disk corpus supports —
    `frame_dataset`, `alignments`, `references` — needs only the
    utterances and the topology.
    """
    topology = read_topology(os.path.join(path, "topology.txt"))
    alignments = read_alignments(os.path.join(path, "alignments.txt"))
    refs = read_transcripts(os.path.join(path, "refs.txt"))
    utterances = []
    for utt_id, states in alignments:
        if utt_id not in refs:
            raise ParseError(
                f"{path}: utterance {utt_id!r} has an alignment but no "
                "reference"
            )
        feats = read_features(
            os.path.join(path, "features", f"{utt_id}.feat")
        )
        if feats.num_frames != states.size:
            raise DataError(
                f"{path}: utterance {utt_id!r} has {feats.num_frames} "
                f"frames but {states.size} alignment states"
            )
        utterances.append(
            Utterance(utt_id, feats.data, states, list(refs[utt_id]))
        )
    return SynthCorpus(None, topology, None, utterances)
