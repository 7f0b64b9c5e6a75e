"""Argparse front end: every pipeline station as a subcommand.

The `deskasr` program reads one INI config file per run (see
`config.py` for the schema); flags name inputs and outputs.  The only
environment variable honored is DESKASR_OUT_DIR, which overrides the
output directory of `experiment`.
"""

import argparse
import logging
import sys

import numpy as np

from .. import __version__
from ..errors import (
    ConfigError,
    DataError,
    DecodeError,
    NumericsError,
    ParseError,
    ShapeError,
)
from ..features import add_deltas, canonical_rows, cmvn, logmel, read_waveform, write_features
from ..fusion import build_joint, load_joint, retrain_joint, save_joint
from ..lm import (
    MixtureLm,
    Vocab,
    arpa_read,
    arpa_write,
    count_ngrams,
    entropy_prune,
    estimate_kn,
    interpolate_em,
    merge_interpolated,
    perplexity,
)
from ..nn import Network, load_network, save_network
from ..nnlm import (
    grid_search_weights,
    load_nnlm,
    read_nbest,
    rescore_nbest,
    save_nnlm,
    train_nnlm,
    write_nbest,
    NBestEntry,
    NBestList,
)
from ..trainer import evaluate, train, write_history
from . import config as cfgmod
from . import iofmt, pipeline
from .experiment import StageError, run_experiment

CLI_ERRORS = (
    ConfigError, DataError, DecodeError, NumericsError, ParseError,
    ShapeError, StageError, OSError,
)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        return args.func(args)
    except CLI_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="deskasr",
        description="Desk-scale hybrid neural-network/HMM speech "
        "recognition toolkit.",
    )
    parser.add_argument(
        "--version", action="version", version=f"deskasr {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="sample a synthetic corpus to a directory")
    p.add_argument("--config", required=True, help="run config (INI)")
    p.add_argument("--out", required=True, help="corpus directory to create")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="run the front end over waveforms")
    p.add_argument("wav", nargs="+", help="raw PCM waveform files")
    p.add_argument("--out", required=True, help="output directory for .feat files")
    p.add_argument("--num-filters", type=int, default=40)
    p.add_argument("--frame-ms", type=int, default=25)
    p.add_argument("--shift-ms", type=int, default=10)
    p.add_argument("--cmvn", action="store_true", help="normalize per side")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--deltas", action="store_true", help="append deltas")
    group.add_argument(
        "--context", type=int, default=None,
        help="emit canonical rows (deltas + splice) with this context",
    )
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train one configured acoustic model")
    p.add_argument("--config", required=True)
    p.add_argument("--corpus", required=True, help="training corpus directory")
    p.add_argument("--model", required=True, help="name of a [model ...] section")
    p.add_argument("--out", required=True, help="directory for model artifacts")
    p.add_argument("--eval-corpus", default=None, help="held-out corpus directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("fuse", help="evaluate frame-level score fusion")
    p.add_argument("--models", nargs="+", required=True, help="trained .npz models")
    p.add_argument("--weights", default=None, help="comma-separated member weights")
    p.add_argument("--corpus", required=True, help="evaluation corpus directory")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("joint", help="build (and optionally retrain) a joint model")
    p.add_argument("--models", nargs="+", required=True, help="member .npz models")
    p.add_argument("--weights", default=None)
    p.add_argument("--out", required=True, help="joint model output path")
    p.add_argument("--retrain-epochs", type=int, default=0)
    p.add_argument("--config", default=None, help="run config (for [train])")
    p.add_argument("--corpus", default=None, help="training corpus directory")
    p.set_defaults(func=cmd_joint)

    p = sub.add_parser("decode", help="hybrid Viterbi decode of a corpus")
    p.add_argument("--model", required=True, help="network .npz or joint model")
    p.add_argument("--joint", action="store_true", help="model is a joint model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--priors", required=True, help="state priors .npy")
    p.add_argument("--out", required=True, help="hypothesis transcript file")
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--context", type=int, default=None)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("score", help="word error rate of hypotheses vs references")
    p.add_argument("--refs", required=True)
    p.add_argument("--hyps", required=True)
    p.add_argument("--per-utt", action="store_true", help="also print per-utterance rows")
    p.set_defaults(func=cmd_score)

    lm = sub.add_parser("lm", help="n-gram language model operations")
    lmsub = lm.add_subparsers(dest="lm_command", required=True)

    p = lmsub.add_parser("count", help="write raw n-gram counts")
    p.add_argument("--text", required=True, help="sentence file")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--vocab", default=None, help="word list file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lm_count)

    p = lmsub.add_parser("estimate", help="estimate a smoothed model, write ARPA")
    p.add_argument("--text", required=True)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--vocab", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lm_estimate)

    p = lmsub.add_parser("interp", help="EM-fit mixture weights on held-out text")
    p.add_argument("--arpa", action="append", required=True, help="repeat per component")
    p.add_argument("--heldout", required=True)
    p.add_argument("--out", default=None, help="weights file to write")
    p.set_defaults(func=cmd_lm_interp)

    p = lmsub.add_parser("merge", help="collapse a weighted mixture into one model")
    p.add_argument("--arpa", action="append", required=True)
    p.add_argument("--weights", required=True, help="comma-separated simplex weights")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lm_merge)

    p = lmsub.add_parser("prune", help="entropy-prune an ARPA model")
    p.add_argument("--arpa", required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lm_prune)

    p = lmsub.add_parser("ppl", help="perplexity of a model on text")
    p.add_argument("--arpa", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--oov-policy", default="score-unk", choices=["score-unk", "skip"])
    p.set_defaults(func=cmd_lm_ppl)

    nnlm = sub.add_parser("nnlm", help="neural language model operations")
    nnsub = nnlm.add_subparsers(dest="nnlm_command", required=True)

    p = nnsub.add_parser("train", help="train the configured neural LM")
    p.add_argument("--config", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--out", required=True, help="model .npz path")
    p.set_defaults(func=cmd_nnlm_train)

    p = nnsub.add_parser("ppl", help="perplexity of a neural LM on text")
    p.add_argument("--model", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--oov-policy", default="score-unk", choices=["score-unk", "skip"])
    p.set_defaults(func=cmd_nnlm_ppl)

    p = sub.add_parser("rescore", help="rerank an N-best list with LMs")
    p.add_argument("--nbest", required=True)
    p.add_argument("--out", required=True, help="reranked N-best output")
    p.add_argument("--arpa", action="append", default=[], help="n-gram component (repeatable)")
    p.add_argument("--nnlm", default=None, help="neural LM component")
    p.add_argument("--lambdas", default=None, help="comma-separated mixture weights")
    p.add_argument("--em-heldout", default=None, help="fit mixture weights on this text")
    p.add_argument("--w-am", type=float, default=1.0)
    p.add_argument("--w-lm", type=float, default=1.0)
    p.add_argument("--wip", type=float, default=0.0)
    p.add_argument("--refs", default=None, help="references (enables WER report)")
    p.add_argument("--grid", action="store_true", help="grid-search (w_lm, wip); needs --refs")
    p.add_argument("--hyps-out", default=None, help="write the 1-best transcripts here")
    p.set_defaults(func=cmd_rescore)

    p = sub.add_parser("experiment", help="run the full configured pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="report directory (DESKASR_OUT_DIR wins)")
    p.set_defaults(func=cmd_experiment)

    return parser


def _floats_arg(raw):
    try:
        return tuple(float(p) for p in raw.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {raw!r}")


# --- corpus / model commands ----------------------------------------------


def cmd_synth(args):
    parser = cfgmod.read_config(args.config)
    synth_cfg = cfgmod.build_synth_config(parser)
    from ..am import synth_corpus

    corpus = synth_corpus(synth_cfg)
    iofmt.write_corpus_dir(args.out, corpus)
    frames = sum(u.states.size for u in corpus.utterances)
    print(f"corpus = {args.out}")
    print(f"utterances = {len(corpus.utterances)}")
    print(f"frames = {frames}")
    print(f"states = {corpus.topology.num_states}")
    return 0


def cmd_features(args):
    import os

    os.makedirs(args.out, exist_ok=True)
    for path in args.wav:
        wave = read_waveform(path)
        feats = logmel(
            wave, frame_ms=args.frame_ms, shift_ms=args.shift_ms,
            num_filters=args.num_filters,
        )
        if args.cmvn:
            feats = cmvn(feats)
        if args.context is not None:
            feats = canonical_rows(feats.data, context=args.context)
        elif args.deltas:
            feats = add_deltas(feats)
        stem = os.path.splitext(os.path.basename(path))[0]
        out_path = os.path.join(args.out, f"{stem}.feat")
        write_features(out_path, feats)
        print(f"{out_path} frames={feats.num_frames} dim={feats.dim}")
    return 0


def _model_section(parser, name):
    for model_cfg in cfgmod.model_configs(parser):
        if model_cfg.name == name:
            return model_cfg
    raise ConfigError(f"config defines no [model {name}]")


def cmd_train(args):
    import os

    parser = cfgmod.read_config(args.config)
    model_cfg = _model_section(parser, args.model)
    context = cfgmod.get(parser, "features", "context", int, 2) \
        if parser.has_section("features") else 2
    corpus = iofmt.load_corpus_dir(args.corpus)
    dataset = pipeline.corpus_dataset(corpus, context)
    eval_ds = None
    if args.eval_corpus:
        eval_ds = pipeline.corpus_dataset(
            iofmt.load_corpus_dir(args.eval_corpus), context
        )
    train_cfg = cfgmod.build_train_config(
        parser, dropout=model_cfg.dropout_schedule(),
        epochs=model_cfg.epochs, lr0=model_cfg.lr0, seed=model_cfg.seed,
    )
    base_dim = corpus.utterances[0].features.shape[1]
    spec = model_cfg.network_spec(
        base_dim, context, corpus.topology.num_states
    )
    network = Network(spec, seed=train_cfg.seed)
    history = train(network, dataset, train_cfg, eval_dataset=eval_ds)
    os.makedirs(args.out, exist_ok=True)
    model_path = os.path.join(args.out, f"{args.model}.npz")
    save_network(model_path, network)
    write_history(os.path.join(args.out, f"{args.model}.history.csv"), history)
    alpha = cfgmod.get(parser, "decode", "prior_alpha", float, 0.5) \
        if parser.has_section("decode") else 0.5
    priors = pipeline.corpus_priors(corpus, alpha)
    np.save(os.path.join(args.out, f"{args.model}.priors.npy"), priors)
    print(f"model = {model_path}")
    print(f"params = {spec.param_count()}")
    for stat in history[-1:]:
        print(f"final_ce = {stat.loss!r}")
        print(f"frame_accuracy = {stat.frame_accuracy!r}")
    return 0


def cmd_fuse(args):
    members = [load_network(path) for path in args.models]
    weights = _floats_arg(args.weights) if args.weights else None
    corpus = iofmt.load_corpus_dir(args.corpus)
    joint = build_joint(members, weights)
    _, context = pipeline.model_geometry(joint)
    dataset = pipeline.corpus_dataset(corpus, context)
    for path, member in zip(args.models, members):
        loss, acc = evaluate(member, dataset)
        print(f"{path}: ce = {loss!r}, frame_accuracy = {acc!r}")
    loss, acc = evaluate(joint, dataset)
    print(f"score-fusion: ce = {loss!r}, frame_accuracy = {acc!r}")
    return 0


def cmd_joint(args):
    members = [load_network(path) for path in args.models]
    weights = _floats_arg(args.weights) if args.weights else None
    joint = build_joint(members, weights)
    if args.retrain_epochs > 0:
        if not (args.config and args.corpus):
            raise ConfigError("--retrain-epochs needs --config and --corpus")
        import dataclasses

        parser = cfgmod.read_config(args.config)
        context = cfgmod.get(parser, "features", "context", int, 2) \
            if parser.has_section("features") else 2
        corpus = iofmt.load_corpus_dir(args.corpus)
        dataset = pipeline.corpus_dataset(corpus, context)
        train_cfg = dataclasses.replace(
            cfgmod.build_train_config(parser), epochs=args.retrain_epochs
        )
        init_ce, _ = evaluate(joint, dataset)
        joint, history = retrain_joint(joint, dataset, train_cfg)
        final_ce, _ = evaluate(joint, dataset)
        print(f"retrain_ce = {init_ce!r} -> {final_ce!r}")
    save_joint(args.out, joint)
    print(f"joint = {args.out}")
    print(f"branches = {len(joint.branches)}")
    return 0


def cmd_decode(args):
    model = load_joint(args.model) if args.joint else load_network(args.model)
    corpus = iofmt.load_corpus_dir(args.corpus)
    priors = np.load(args.priors)
    hyps = pipeline.decode_corpus(
        model, corpus, priors, kappa=args.kappa, context=args.context
    )
    iofmt.write_transcripts(args.out, sorted(hyps.items()))
    print(f"hypotheses = {args.out}")
    print(f"utterances = {len(hyps)}")
    return 0


def cmd_score(args):
    from ..am import wer

    refs = iofmt.read_transcripts(args.refs)
    hyps = iofmt.read_transcripts(args.hyps)
    missing = sorted(set(refs) - set(hyps))
    if missing:
        raise DataError(f"hypotheses missing for utterances: {missing[:5]}")
    total = None
    for utt_id, ref in refs.items():
        report = wer(ref, hyps[utt_id])
        if args.per_utt:
            print(f"{utt_id} wer = {report.rate!r} errors = {report.errors}")
        total = report if total is None else total + report
    print(f"wer = {total.rate!r}")
    print(f"substitutions = {total.substitutions}")
    print(f"deletions = {total.deletions}")
    print(f"insertions = {total.insertions}")
    print(f"ref_words = {total.ref_words}")
    return 0


# --- language model commands -----------------------------------------------


def _read_vocab(path):
    with open(path) as fh:
        words = [line.strip() for line in fh if line.strip()]
    if not words:
        raise ParseError(f"{path}: no words found")
    return Vocab(words)


def cmd_lm_count(args):
    sentences = iofmt.read_sentences(args.text)
    vocab = _read_vocab(args.vocab) if args.vocab else None
    counts = count_ngrams(sentences, args.order, vocab=vocab)
    with open(args.out, "w") as fh:
        for k in range(1, counts.order + 1):
            grams = counts.grams[k - 1]
            for gram in sorted(grams):
                words = " ".join(counts.vocab.token(i) for i in gram)
                fh.write(f"{words}\t{grams[gram]}\n")
    for k in range(1, counts.order + 1):
        print(f"{k}-grams = {len(counts.grams[k - 1])}")
    return 0


def cmd_lm_estimate(args):
    sentences = iofmt.read_sentences(args.text)
    vocab = _read_vocab(args.vocab) if args.vocab else None
    model = estimate_kn(count_ngrams(sentences, args.order, vocab=vocab))
    arpa_write(model, args.out)
    print(f"model = {args.out}")
    print(f"order = {model.order}")
    return 0


def cmd_lm_interp(args):
    if len(args.arpa) < 2:
        raise ConfigError("interp needs at least two --arpa components")
    components = [arpa_read(path) for path in args.arpa]
    heldout = iofmt.read_sentences(args.heldout)
    weights = interpolate_em(components, heldout)
    mixture = MixtureLm(components, weights)
    for path, lam in zip(args.arpa, weights.lam):
        print(f"lambda[{path}] = {lam!r}")
    for path, component in zip(args.arpa, components):
        print(f"ppl[{path}] = {perplexity(component, heldout).ppl!r}")
    print(f"ppl[mixture] = {perplexity(mixture, heldout).ppl!r}")
    if args.out:
        with open(args.out, "w") as fh:
            for path, lam in zip(args.arpa, weights.lam):
                fh.write(f"{lam!r}\t{path}\n")
        print(f"weights = {args.out}")
    return 0


def cmd_lm_merge(args):
    components = [arpa_read(path) for path in args.arpa]
    weights = _floats_arg(args.weights)
    merged = merge_interpolated(components, weights)
    arpa_write(merged, args.out)
    print(f"model = {args.out}")
    print(f"order = {merged.order}")
    return 0


def cmd_lm_prune(args):
    model = arpa_read(args.arpa)
    before = sum(len(table) for table in model.probs)
    pruned = entropy_prune(model, args.theta)
    after = sum(len(table) for table in pruned.probs)
    arpa_write(pruned, args.out)
    print(f"model = {args.out}")
    print(f"ngrams = {before} -> {after}")
    return 0


def cmd_lm_ppl(args):
    model = arpa_read(args.arpa)
    report = perplexity(
        model, iofmt.read_sentences(args.text), oov_policy=args.oov_policy
    )
    print(f"ppl = {report.ppl!r}")
    print(f"logprob10 = {report.logprob10!r}")
    print(f"tokens = {report.tokens}")
    print(f"oov = {report.oov_count}")
    return 0


def cmd_nnlm_train(args):
    parser = cfgmod.read_config(args.config)
    nnlm_cfg = cfgmod.build_nnlm_config(parser)
    sentences = iofmt.read_sentences(args.text)
    model = train_nnlm(sentences, nnlm_cfg)
    save_nnlm(args.out, model)
    print(f"model = {args.out}")
    print(f"vocab = {len(model.vocab.tokens)}")
    for stat in model.train_history[-1:]:
        print(f"final_ce = {stat.loss!r}")
    return 0


def cmd_nnlm_ppl(args):
    model = load_nnlm(args.model)
    report = perplexity(
        model, iofmt.read_sentences(args.text), oov_policy=args.oov_policy
    )
    print(f"ppl = {report.ppl!r}")
    print(f"tokens = {report.tokens}")
    print(f"oov = {report.oov_count}")
    return 0


# --- rescoring ---------------------------------------------------------------


def _build_scorer(args):
    components = [arpa_read(path) for path in args.arpa]
    if args.nnlm:
        components.append(load_nnlm(args.nnlm))
    if not components:
        return None
    if len(components) == 1:
        return components[0]
    if args.lambdas and args.em_heldout:
        raise ConfigError("pass either --lambdas or --em-heldout, not both")
    if args.lambdas:
        weights = _floats_arg(args.lambdas)
    elif args.em_heldout:
        weights = interpolate_em(
            components, iofmt.read_sentences(args.em_heldout)
        )
        for lam in weights.lam:
            print(f"lambda = {lam!r}")
    else:
        raise ConfigError(
            "multiple LM components need --lambdas or --em-heldout"
        )
    return MixtureLm(components, weights)


def cmd_rescore(args):
    nbest = read_nbest(args.nbest)
    scorer = _build_scorer(args)
    refs = None
    if args.refs:
        refs = iofmt.read_transcripts(args.refs)
    if args.grid:
        if refs is None:
            raise ConfigError("--grid needs --refs")
        best = grid_search_weights(nbest, refs, scorer, (args.w_am,))
        w_am, w_lm, wip = best.w_am, best.w_lm, best.wip
        print(f"grid_w_lm = {w_lm!r}")
        print(f"grid_wip = {wip!r}")
    else:
        w_am, w_lm, wip = args.w_am, args.w_lm, args.wip
    result = rescore_nbest(nbest, scorer, w_am, w_lm, wip)
    reranked = NBestList({
        utt_id: [
            NBestEntry(entry.words, entry.am_score, entry.lm_score)
            for entry in entries
        ]
        for utt_id, entries in result.lists.items()
    })
    write_nbest(args.out, reranked)
    print(f"nbest = {args.out}")
    if args.hyps_out:
        iofmt.write_transcripts(args.hyps_out, sorted(result.one_best.items()))
        print(f"hypotheses = {args.hyps_out}")
    if refs is not None:
        from ..am import wer

        total = None
        for utt_id, hyp in result.one_best.items():
            report = wer(refs[utt_id], hyp)
            total = report if total is None else total + report
        print(f"wer = {total.rate!r}")
        print(f"errors = {total.errors}")
    return 0


def cmd_experiment(args):
    config = cfgmod.load_experiment_config(args.config)
    out = run_experiment(config, out_dir=args.out)
    print(f"report = {out}")
    with open(f"{out}/summary.txt") as fh:
        sys.stdout.write(fh.read())
    return 0
