"""Config-driven experiment runner.

`run_experiment` executes the full desk-scale pipeline — synthesize a
corpus, build canonical-row datasets, train the configured acoustic
models, compare score fusion against the joint model, estimate the
language-model ladder, and rescore N-best lists — writing CSV report
tables, serialized models, and a log into one output directory.

Everything random flows from seeds in the config, so rerunning the same
config reproduces the report byte for byte.  Each stage persists its
artifacts as it finishes; a failing stage aborts the run with the stage
name while everything already written (including the log) stays on
disk.
"""

import csv
import dataclasses
import logging
import os
import shutil

import numpy as np

from ..am import bayes_report, synth_corpus, wer
from ..am.synth import default_words
from ..fusion import build_joint, retrain_joint, save_joint
from ..lm import (
    MixtureLm,
    Vocab,
    arpa_write,
    count_ngrams,
    estimate_kn,
    interpolate_em,
    perplexity,
)
from ..nn import Network, save_network
from ..nnlm import (
    grid_search_weights,
    rescore_nbest,
    save_nnlm,
    synthetic_nbest,
    train_nnlm,
    write_nbest,
)
from ..trainer import evaluate, train, write_history
from . import iofmt, pipeline
from .config import resolve_out_dir

logger = logging.getLogger("deskasr.experiment")


class StageError(RuntimeError):
    """A pipeline stage failed; the message names the stage."""


class _Run:
    """Mutable state threaded through the stages of one experiment."""

    def __init__(self, config, out_dir):
        self.config = config
        self.out = out_dir
        self.full_corpus = None
        self.train_corpus = None
        self.eval_corpus = None
        self.train_ds = None
        self.eval_ds = None
        self.priors = None
        self.networks = {}  # name -> Network
        self.model_rows = []  # models.csv rows
        self.model_metrics = {}  # name -> (frame_acc, WerReport)
        self.fusion_rows = []
        self.ppl_rows = []
        self.ladder_rows = []
        self.vocab = None
        self.kn_models = []
        self.nnlm = None
        self.mixture_ngram = None
        self.mixture_full = None
        self.lambda_ngram = None
        self.lambda_full = None
        self.nbest = None
        self.refs = None

    def path(self, *parts):
        full = os.path.join(self.out, *parts)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        return full


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    return value


def _corpus_wer_report(refs, hypotheses):
    total = None
    for utt_id, hyp in hypotheses.items():
        report = wer(refs[utt_id], hyp)
        total = report if total is None else total + report
    return total


# --- stages ---------------------------------------------------------------


def _stage_synth(run):
    cfg = run.config
    total = cfg.synth.num_utts + cfg.eval_utts
    full = synth_corpus(dataclasses.replace(cfg.synth, num_utts=total))
    run.full_corpus = full
    run.train_corpus = dataclasses.replace(
        full, utterances=full.utterances[: cfg.synth.num_utts]
    )
    run.eval_corpus = dataclasses.replace(
        full, utterances=full.utterances[cfg.synth.num_utts:]
    )
    iofmt.write_corpus_dir(run.path("corpus", "train"), run.train_corpus)
    iofmt.write_corpus_dir(run.path("corpus", "eval"), run.eval_corpus)
    logger.info(
        "synth: %d train / %d eval utterances, vocab %d, %d states",
        cfg.synth.num_utts, cfg.eval_utts, cfg.synth.vocab_size,
        full.topology.num_states,
    )


def _stage_features(run):
    cfg = run.config
    run.train_ds = pipeline.corpus_dataset(run.train_corpus, cfg.context)
    run.eval_ds = pipeline.corpus_dataset(run.eval_corpus, cfg.context)
    run.priors = pipeline.corpus_priors(run.train_corpus, cfg.prior_alpha)
    np.save(run.path("models", "priors.npy"), run.priors)
    logger.info(
        "features: context %d -> %d-dim canonical rows, %d train / %d "
        "eval frames",
        cfg.context, run.train_ds.inputs.shape[1], len(run.train_ds),
        len(run.eval_ds),
    )


def _train_one(run, model_cfg):
    cfg = run.config
    train_cfg = dataclasses.replace(
        cfg.train,
        epochs=model_cfg.epochs if model_cfg.epochs is not None
        else cfg.train.epochs,
        lr0=model_cfg.lr0 if model_cfg.lr0 is not None else cfg.train.lr0,
        seed=model_cfg.seed if model_cfg.seed is not None
        else cfg.train.seed,
        dropout=model_cfg.dropout_schedule(),
    )
    spec = model_cfg.network_spec(
        cfg.synth.feat_dim, cfg.context, run.train_corpus.topology.num_states
    )
    network = Network(spec, seed=train_cfg.seed)
    history = train(network, run.train_ds, train_cfg,
                    eval_dataset=run.eval_ds)
    return network, history, train_cfg


def _stage_train(run):
    cfg = run.config
    for model_cfg in cfg.models:
        network, history, train_cfg = _train_one(run, model_cfg)
        _, acc = evaluate(network, run.eval_ds)
        hyps = pipeline.decode_corpus(
            network, run.eval_corpus, run.priors, kappa=cfg.decode_kappa
        )
        report = _corpus_wer_report(dict(run.eval_corpus.references()), hyps)
        run.networks[model_cfg.name] = network
        run.model_metrics[model_cfg.name] = (acc, report)
        save_network(run.path("models", f"{model_cfg.name}.npz"), network)
        write_history(
            run.path("models", f"{model_cfg.name}.history.csv"), history
        )
        run.model_rows.append([
            model_cfg.name, model_cfg.kind, network.spec.param_count(),
            train_cfg.epochs, history[-1].loss if history else "",
            acc, report.rate, report.errors, report.ref_words,
        ])
        logger.info(
            "train: %s (%s) frame accuracy %.4f, WER %.4f",
            model_cfg.name, model_cfg.kind, acc, report.rate,
        )
    oracle_report, oracle_acc = bayes_report(run.eval_corpus)
    run.model_rows.append([
        "oracle", "bayes", "", "", "", oracle_acc, oracle_report.rate,
        oracle_report.errors, oracle_report.ref_words,
    ])
    logger.info(
        "train: oracle frame accuracy %.4f, WER %.4f",
        oracle_acc, oracle_report.rate,
    )
    _write_csv(
        run.path("models.csv"),
        ["model", "kind", "params", "epochs", "train_ce",
         "frame_accuracy", "wer", "word_errors", "ref_words"],
        run.model_rows,
    )


def _fusion_row(run, label, model):
    _, acc = evaluate(model, run.eval_ds)
    hyps = pipeline.decode_corpus(
        model, run.eval_corpus, run.priors, kappa=run.config.decode_kappa
    )
    report = _corpus_wer_report(dict(run.eval_corpus.references()), hyps)
    logger.info(
        "fusion: %s frame accuracy %.4f, WER %.4f", label, acc, report.rate
    )
    return [label, acc, report.rate, report.errors, report.ref_words]


def _stage_fusion(run):
    cfg = run.config
    members = [run.networks[name] for name in cfg.fusion_members]
    for name in cfg.fusion_members:
        acc, report = run.model_metrics[name]
        run.fusion_rows.append(
            [name, acc, report.rate, report.errors, report.ref_words]
        )
    joint = build_joint(members, cfg.fusion_weights)
    init_ce, _ = evaluate(joint, run.train_ds)
    run.fusion_rows.append(_fusion_row(run, "score-fusion", joint))
    if cfg.fusion_retrain_epochs > 0:
        retrain_cfg = dataclasses.replace(
            cfg.train, epochs=cfg.fusion_retrain_epochs, dropout=None
        )
        joint, history = retrain_joint(joint, run.train_ds, retrain_cfg)
        final_ce, _ = evaluate(joint, run.train_ds)
        write_history(run.path("models", "joint.history.csv"), history)
        run.fusion_rows.append(_fusion_row(run, "joint-retrained", joint))
        logger.info(
            "fusion: joint retraining CE %.4f -> %.4f over %d epochs",
            init_ce, final_ce, cfg.fusion_retrain_epochs,
        )
    save_joint(run.path("models", "joint.jnet"), joint)
    _write_csv(
        run.path("fusion.csv"),
        ["system", "frame_accuracy", "wer", "word_errors", "ref_words"],
        run.fusion_rows,
    )


def _stage_lm(run):
    cfg = run.config
    model = run.full_corpus.model
    text = run.train_corpus.sentences() + pipeline.sample_text(
        model.word_bigram, cfg.lm_text_sentences, cfg.synth.min_words,
        cfg.synth.max_words, cfg.lm_text_seed,
    )
    heldout = pipeline.sample_text(
        model.word_bigram, cfg.lm_heldout_sentences, cfg.synth.min_words,
        cfg.synth.max_words, cfg.lm_heldout_seed,
    )
    iofmt.write_sentences(run.path("lm", "train.txt"), text)
    iofmt.write_sentences(run.path("lm", "heldout.txt"), heldout)
    run.vocab = Vocab(default_words(cfg.synth.vocab_size))

    def ppl_row(label, order, scorer):
        report = perplexity(scorer, heldout)
        run.ppl_rows.append([
            label, order, report.ppl, report.logprob10, report.tokens,
            report.oov_count,
        ])
        logger.info("lm: %s held-out perplexity %.4f", label, report.ppl)

    for order in cfg.lm_orders:
        kn = estimate_kn(count_ngrams(text, order, vocab=run.vocab))
        run.kn_models.append(kn)
        arpa_write(kn, run.path("lm", f"kn{order}.arpa"))
        ppl_row(f"kn{order}", order, kn)

    nnlm_cfg = dataclasses.replace(cfg.nnlm, vocab=run.vocab)
    run.nnlm = train_nnlm(text, nnlm_cfg)
    save_nnlm(run.path("lm", "nnlm.npz"), run.nnlm)
    ppl_row("nnlm", run.nnlm.order, run.nnlm)

    run.lambda_ngram = interpolate_em(run.kn_models, heldout)
    run.mixture_ngram = MixtureLm(run.kn_models, run.lambda_ngram)
    ppl_row("interp-ngram", max(cfg.lm_orders), run.mixture_ngram)

    components = run.kn_models + [run.nnlm]
    run.lambda_full = interpolate_em(components, heldout)
    run.mixture_full = MixtureLm(components, run.lambda_full)
    ppl_row("interp-ngram+nnlm", max(cfg.lm_orders), run.mixture_full)

    with open(run.path("lm", "weights.txt"), "w") as fh:
        names = [f"kn{o}" for o in cfg.lm_orders]
        for name, lam in zip(names, run.lambda_ngram.lam):
            fh.write(f"interp-ngram {name} {lam!r}\n")
        for name, lam in zip(names + ["nnlm"], run.lambda_full.lam):
            fh.write(f"interp-ngram+nnlm {name} {lam!r}\n")
    _write_csv(
        run.path("ppl.csv"),
        ["model", "order", "ppl", "logprob10", "tokens", "oov"],
        run.ppl_rows,
    )


def _ladder_row(run, label, scorer):
    cfg = run.config
    if scorer is None:
        weights = (cfg.rescore_w_am, 0.0, 0.0)
    else:
        best = grid_search_weights(
            run.nbest, run.refs, scorer, (cfg.rescore_w_am,),
            cfg.w_lm_grid, cfg.wip_grid,
        )
        weights = (best.w_am, best.w_lm, best.wip)
    result = rescore_nbest(run.nbest, scorer, *weights)
    report = _corpus_wer_report(run.refs, result.one_best)
    logger.info(
        "rescore: %s (w_am=%g, w_lm=%g, wip=%g) WER %.4f",
        label, *weights, report.rate,
    )
    run.ladder_rows.append([
        label, *weights, report.rate, report.errors, report.ref_words,
    ])
    return result


def _stage_nbest(run):
    cfg = run.config
    run.nbest = synthetic_nbest(
        run.eval_corpus, n_alt=cfg.nbest_n_alt, seed=cfg.nbest_seed
    )
    run.refs = {u: list(w) for u, w in run.eval_corpus.references()}
    write_nbest(run.path("nbest", "eval.nbest"), run.nbest)
    _ladder_row(run, "am-only", None)
    _ladder_row(run, "+interp-ngram", run.mixture_ngram)
    final = _ladder_row(run, "+interp-ngram+nnlm", run.mixture_full)
    rates = [row[4] for row in run.ladder_rows]
    if any(b > a for a, b in zip(rates, rates[1:])):
        logger.warning("rescore: ladder WER is not monotone: %s", rates)
    iofmt.write_transcripts(
        run.path("nbest", "rescored.hyps.txt"),
        sorted(final.one_best.items()),
    )
    _write_csv(
        run.path("wer_ladder.csv"),
        ["system", "w_am", "w_lm", "wip", "wer", "word_errors", "ref_words"],
        run.ladder_rows,
    )


def _stage_report(run):
    tables = [
        ("Acoustic models (held-out)", run.path("models.csv")),
        ("Fusion vs joint (held-out)", run.path("fusion.csv")),
        ("Language-model ladder (held-out text)", run.path("ppl.csv")),
        ("N-best rescoring ladder", run.path("wer_ladder.csv")),
    ]
    with open(run.path("summary.txt"), "w") as fh:
        fh.write("deskasr experiment report\n")
        fh.write("=========================\n")
        for title, path in tables:
            fh.write(f"\n{title}\n{'-' * len(title)}\n")
            with open(path) as table:
                fh.write(table.read())
    logger.info("report: wrote %s", run.path("summary.txt"))


STAGES = (
    ("synth", _stage_synth),
    ("features", _stage_features),
    ("train", _stage_train),
    ("fusion", _stage_fusion),
    ("lm", _stage_lm),
    ("nbest", _stage_nbest),
    ("report", _stage_report),
)


def run_experiment(config, out_dir=None):
    """Run every stage; returns the report directory path.

    `out_dir` (or `DESKASR_OUT_DIR`, which wins) overrides the config's
    own output directory.  Raises StageError naming the first failing
    stage; partial outputs and the log survive the failure.
    """
    out = resolve_out_dir(out_dir, config.out_dir)
    os.makedirs(out, exist_ok=True)
    run = _Run(config, out)
    if config.source_path and os.path.isfile(config.source_path):
        copied = os.path.join(out, "config.ini")
        if os.path.abspath(config.source_path) != os.path.abspath(copied):
            shutil.copyfile(config.source_path, copied)
    handler = logging.FileHandler(os.path.join(out, "log.txt"), mode="w")
    handler.setFormatter(
        logging.Formatter("%(asctime)s %(levelname)s %(message)s")
    )
    logger.addHandler(handler)
    level = logger.level
    logger.setLevel(logging.INFO)
    try:
        for name, stage in STAGES:
            logger.info("stage %s: start", name)
            try:
                stage(run)
            except Exception as exc:
                logger.error("stage %s: failed: %s", name, exc)
                handler.flush()
                raise StageError(f"stage '{name}' failed: {exc}") from exc
            logger.info("stage %s: done", name)
    finally:
        handler.close()
        logger.removeHandler(handler)
        logger.setLevel(level)
    return out
