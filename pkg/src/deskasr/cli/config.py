"""Run-config files: one INI-style key=value text file describes a run.

Sections map to pipeline stations (`[synth]`, `[features]`, `[train]`,
`[model <name>]`, `[fusion]`, `[decode]`, `[lm]`, `[nnlm]`, `[nbest]`,
`[rescore]`, `[experiment]`).  Every key is validated against a known
set so typos fail loudly, and seeds must be written out explicitly —
nothing random hides behind an implicit default.
"""

import configparser
import os
from dataclasses import dataclass

from ..am import SynthConfig
from ..errors import ConfigError
from ..nn import archs
from ..nnlm import NnlmConfig
from ..trainer import DropoutSchedule, TrainConfig

_REQUIRED = object()


def read_config(path):
    """Parse an INI run config; missing files and unknown keys fail."""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}")
    _check_known(parser, path)
    return parser


# --- raw value converters ----------------------------------------------


def _bool(raw):
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _split(raw):
    return [p for p in (x.strip() for x in raw.split(",")) if p]


def _ints(raw):
    return tuple(int(p) for p in _split(raw))


def _floats(raw):
    return tuple(float(p) for p in _split(raw))


def _strs(raw):
    return tuple(_split(raw))


def _pairs(raw):
    """Window/pool lists like `3x3,3x1` -> ((3, 3), (3, 1))."""
    out = []
    for part in _split(raw):
        a, sep, b = part.partition("x")
        if not sep:
            raise ValueError(f"expected WxH pair, got {part!r}")
        out.append((int(a), int(b)))
    return tuple(out)


def get(parser, section, key, convert=str, default=_REQUIRED):
    """Typed section lookup with a required/default policy."""
    if not parser.has_option(section, key):
        if default is _REQUIRED:
            raise ConfigError(f"[{section}] is missing required key '{key}'")
        return default
    raw = parser.get(section, key).strip()
    try:
        return convert(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}")


# --- known sections / keys ----------------------------------------------

_KNOWN_KEYS = {
    "synth": {
        "seed", "vocab_size", "states_per_word", "feat_dim", "self_loop",
        "num_utts", "min_words", "max_words", "mean_scale", "emission_std",
        "word_process", "bigram_concentration",
    },
    "features": {"context"},
    "train": {"seed", "epochs", "minibatch_frames", "lr0", "lr_decay"},
    "model": {
        "kind", "hidden", "bottleneck", "activation", "group_size",
        "filters", "windows", "pool", "steps", "recurrent_hidden",
        "dropout_p0", "dropout_end_epoch", "dropout_shape",
        "epochs", "lr0", "seed",
    },
    "fusion": {"members", "weights", "retrain_epochs"},
    "decode": {"kappa", "prior_alpha"},
    "lm": {
        "orders", "text_sentences", "text_seed",
        "heldout_sentences", "heldout_seed",
    },
    "nnlm": {
        "seed", "history", "embedding_dim", "hidden_dim", "epochs",
        "lr", "lr_decay", "minibatch",
    },
    "nbest": {"seed", "n_alt"},
    "rescore": {"w_am", "w_lm_grid", "wip_grid"},
    "experiment": {"out_dir", "eval_utts"},
}


def _check_known(parser, path):
    for section in parser.sections():
        base = "model" if section.startswith("model ") else section
        if base == "model" and not section.split(" ", 1)[1].strip():
            raise ConfigError(f"{path}: [{section}] needs a model name")
        known = _KNOWN_KEYS.get(base)
        if known is None:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key in parser.options(section):
            if key not in known:
                raise ConfigError(
                    f"{path}: unknown key '{key}' in [{section}]"
                )


# --- section builders ----------------------------------------------------


def build_synth_config(parser):
    """[synth] -> SynthConfig; the seed must be spelled out."""
    if not parser.has_section("synth"):
        raise ConfigError("config has no [synth] section")
    return SynthConfig(
        vocab_size=get(parser, "synth", "vocab_size", int, 10),
        states_per_word=get(parser, "synth", "states_per_word", int, 3),
        feat_dim=get(parser, "synth", "feat_dim", int, 40),
        self_loop=get(parser, "synth", "self_loop", float, 0.6),
        num_utts=get(parser, "synth", "num_utts", int, 50),
        min_words=get(parser, "synth", "min_words", int, 3),
        max_words=get(parser, "synth", "max_words", int, 8),
        mean_scale=get(parser, "synth", "mean_scale", float, 0.7),
        emission_std=get(parser, "synth", "emission_std", float, 1.0),
        word_process=get(parser, "synth", "word_process", str, "uniform"),
        bigram_concentration=get(
            parser, "synth", "bigram_concentration", float, 0.3
        ),
        seed=get(parser, "synth", "seed", int),
    )


def build_train_config(parser, dropout=None, epochs=None, lr0=None, seed=None):
    """[train] -> TrainConfig, with optional per-model overrides."""
    if not parser.has_section("train"):
        raise ConfigError("config has no [train] section")
    return TrainConfig(
        epochs=epochs if epochs is not None
        else get(parser, "train", "epochs", int, 8),
        minibatch_frames=get(parser, "train", "minibatch_frames", int, 250),
        lr0=lr0 if lr0 is not None else get(parser, "train", "lr0", float, 0.1),
        lr_decay=get(parser, "train", "lr_decay", float, 0.8),
        seed=seed if seed is not None else get(parser, "train", "seed", int),
        dropout=dropout,
    )


def build_nnlm_config(parser, vocab=None):
    if not parser.has_section("nnlm"):
        raise ConfigError("config has no [nnlm] section")
    return NnlmConfig(
        history=get(parser, "nnlm", "history", int, 2),
        embedding_dim=get(parser, "nnlm", "embedding_dim", int, 16),
        hidden_dim=get(parser, "nnlm", "hidden_dim", int, 64),
        vocab=vocab,
        epochs=get(parser, "nnlm", "epochs", int, 8),
        lr=get(parser, "nnlm", "lr", float, 0.1),
        lr_decay=get(parser, "nnlm", "lr_decay", float, 0.8),
        minibatch=get(parser, "nnlm", "minibatch", int, 250),
        seed=get(parser, "nnlm", "seed", int),
    )


MODEL_KINDS = ("dnn", "maxout", "cnn", "rnn")


@dataclass(frozen=True)
class ModelConfig:
    """Declarative description of one network to build and train."""

    name: str
    kind: str
    hidden: tuple
    bottleneck: int
    activation: str = "sigmoid"
    group_size: int = 2
    filters: tuple = (4, 6)
    windows: tuple = ((3, 3), (3, 1))
    pool: tuple = (2, 1)
    steps: int = 3
    recurrent_hidden: int = 16
    dropout_p0: float = 0.0
    dropout_end_epoch: int = 0
    dropout_shape: str = "linear"
    epochs: int = None
    lr0: float = None
    seed: int = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(
                f"model '{self.name}': unknown kind {self.kind!r} "
                f"(expected one of {', '.join(MODEL_KINDS)})"
            )
        if not self.hidden:
            raise ConfigError(f"model '{self.name}': needs hidden sizes")
        if not 0.0 <= self.dropout_p0 < 1.0:
            raise ConfigError(
                f"model '{self.name}': dropout_p0 must be in [0, 1)"
            )

    def dropout_schedule(self):
        if self.dropout_p0 == 0.0:
            return None
        return DropoutSchedule(
            p0=self.dropout_p0,
            end_epoch=self.dropout_end_epoch,
            shape=self.dropout_shape,
        )

    def network_spec(self, base_dim, context, num_outputs):
        """Instantiate the architecture over the canonical frame row."""
        canonical = (2 * context + 1) * 3 * base_dim
        if self.kind == "dnn":
            return archs.dnn_spec(
                canonical, archs.dnn_view(base_dim, context),
                list(self.hidden), bottleneck=self.bottleneck,
                num_outputs=num_outputs, activation=self.activation,
            )
        if self.kind == "maxout":
            return archs.maxout_dnn_spec(
                canonical, archs.dnn_view(base_dim, context),
                list(self.hidden), bottleneck=self.bottleneck,
                num_outputs=num_outputs, group_size=self.group_size,
            )
        if self.kind == "cnn":
            return archs.cnn_spec(
                canonical, archs.conv_view(base_dim, context),
                filters=self.filters, windows=self.windows, pool=self.pool,
                hidden_dims=tuple(self.hidden), bottleneck=self.bottleneck,
                num_outputs=num_outputs, activation=self.activation,
            )
        return archs.rnn_spec(
            canonical,
            archs.rnn_window_view(base_dim, context, steps=self.steps),
            steps=self.steps, recurrent_hidden=self.recurrent_hidden,
            hidden_dims=list(self.hidden), bottleneck=self.bottleneck,
            num_outputs=num_outputs,
        )


def build_model_config(parser, section):
    name = section.split(" ", 1)[1].strip()
    return ModelConfig(
        name=name,
        kind=get(parser, section, "kind"),
        hidden=get(parser, section, "hidden", _ints),
        bottleneck=get(parser, section, "bottleneck", int),
        activation=get(parser, section, "activation", str, "sigmoid"),
        group_size=get(parser, section, "group_size", int, 2),
        filters=get(parser, section, "filters", _ints, (4, 6)),
        windows=get(parser, section, "windows", _pairs, ((3, 3), (3, 1))),
        pool=get(parser, section, "pool", _ints, (2, 1)),
        steps=get(parser, section, "steps", int, 3),
        recurrent_hidden=get(parser, section, "recurrent_hidden", int, 16),
        dropout_p0=get(parser, section, "dropout_p0", float, 0.0),
        dropout_end_epoch=get(parser, section, "dropout_end_epoch", int, 0),
        dropout_shape=get(parser, section, "dropout_shape", str, "linear"),
        epochs=get(parser, section, "epochs", int, None),
        lr0=get(parser, section, "lr0", float, None),
        seed=get(parser, section, "seed", int, None),
    )


def model_configs(parser):
    """All [model <name>] sections, in file order."""
    out = []
    for section in parser.sections():
        if section.startswith("model "):
            out.append(build_model_config(parser, section))
    names = [m.name for m in out]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate model names in config")
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything `run_experiment` needs, resolved from one config file."""

    synth: SynthConfig
    eval_utts: int
    context: int
    train: TrainConfig
    models: tuple
    fusion_members: tuple
    fusion_weights: tuple
    fusion_retrain_epochs: int
    decode_kappa: float
    prior_alpha: float
    lm_orders: tuple
    lm_text_sentences: int
    lm_text_seed: int
    lm_heldout_sentences: int
    lm_heldout_seed: int
    nnlm: NnlmConfig
    nbest_n_alt: int
    nbest_seed: int
    rescore_w_am: float
    w_lm_grid: tuple
    wip_grid: tuple
    out_dir: str
    source_path: str = None

    def __post_init__(self):
        if self.eval_utts < 1:
            raise ConfigError("[experiment] eval_utts must be >= 1")
        if not self.models:
            raise ConfigError("experiment config defines no [model ...]")
        names = {m.name for m in self.models}
        missing = [m for m in self.fusion_members if m not in names]
        if missing:
            raise ConfigError(
                f"[fusion] members reference undefined models: {missing}"
            )
        if len(self.fusion_members) < 2:
            raise ConfigError("[fusion] needs at least two members")
        if self.fusion_weights is not None and len(
            self.fusion_weights
        ) != len(self.fusion_members):
            raise ConfigError("[fusion] weights must match members")
        if len(self.lm_orders) < 2 or list(self.lm_orders) != sorted(
            set(self.lm_orders)
        ):
            raise ConfigError(
                "[lm] orders must be at least two strictly increasing values"
            )
        if self.lm_orders[0] < 1:
            raise ConfigError("[lm] orders must be >= 1")
        if 0.0 not in self.w_lm_grid:
            raise ConfigError(
                "[rescore] w_lm_grid must include 0 (the no-LM baseline)"
            )
        if 0.0 not in self.wip_grid:
            raise ConfigError("[rescore] wip_grid must include 0")


def load_experiment_config(path):
    parser = read_config(path)
    for section in ("synth", "train", "fusion", "lm", "nnlm", "nbest"):
        if not parser.has_section(section):
            raise ConfigError(f"{path}: experiment needs a [{section}] section")
    return ExperimentConfig(
        synth=build_synth_config(parser),
        eval_utts=get(parser, "experiment", "eval_utts", int, 25)
        if parser.has_section("experiment") else 25,
        context=get(parser, "features", "context", int, 2)
        if parser.has_section("features") else 2,
        train=build_train_config(parser),
        models=tuple(model_configs(parser)),
        fusion_members=get(parser, "fusion", "members", _strs),
        fusion_weights=get(parser, "fusion", "weights", _floats, None),
        fusion_retrain_epochs=get(parser, "fusion", "retrain_epochs", int, 2),
        decode_kappa=_decode_opt(parser, "kappa", float, 1.0),
        prior_alpha=_decode_opt(parser, "prior_alpha", float, 0.5),
        lm_orders=get(parser, "lm", "orders", _ints, (2, 3)),
        lm_text_sentences=get(parser, "lm", "text_sentences", int, 400),
        lm_text_seed=get(parser, "lm", "text_seed", int),
        lm_heldout_sentences=get(parser, "lm", "heldout_sentences", int, 120),
        lm_heldout_seed=get(parser, "lm", "heldout_seed", int),
        nnlm=build_nnlm_config(parser),
        nbest_n_alt=get(parser, "nbest", "n_alt", int, 12),
        nbest_seed=get(parser, "nbest", "seed", int),
        rescore_w_am=_rescore_opt(parser, "w_am", float, 1.0),
        w_lm_grid=_rescore_opt(
            parser, "w_lm_grid", _floats, (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)
        ),
        wip_grid=_rescore_opt(parser, "wip_grid", _floats, (0.0, -0.5, 0.5)),
        out_dir=get(parser, "experiment", "out_dir", str, None)
        if parser.has_section("experiment") else None,
        source_path=str(path),
    )


def _decode_opt(parser, key, convert, default):
    if parser.has_section("decode"):
        return get(parser, "decode", key, convert, default)
    return default


def _rescore_opt(parser, key, convert, default):
    if parser.has_section("rescore"):
        return get(parser, "rescore", key, convert, default)
    return default


def resolve_out_dir(cli_value, config_value):
    """Output directory: DESKASR_OUT_DIR overrides flag overrides config."""
    env = os.environ.get("DESKASR_OUT_DIR")
    out = env or cli_value or config_value
    if not out:
        raise ConfigError(
            "no output directory: pass --out, set [experiment] out_dir, "
            "or export DESKASR_OUT_DIR"
        )
    return out
