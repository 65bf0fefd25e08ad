"""Per-sentence SGD training, model selection and random search."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .config import parse_bool
from .crf import CrfParams
from .embeddings import PAD_ID, assemble_table, build_vocab, pretrained_dim
from .errors import ConfigError, DivergenceError
from .evaluation import strict_score
from .model import ModelParams, loss_and_grads, tag
from .network import INIT_MODES, BiLstmParams

log = logging.getLogger(__name__)

HIDDEN_GRID = (25, 50, 100)
WINDOW_GRID = (1, 3, 5)
DIM_GRID = (50, 100, 300, 500, 1000)
RATE_RANGE = (0.05, 0.1)


@dataclass(frozen=True)
class HyperParams:
    hidden: int = 50
    window: int = 3
    d: int = 50
    learning_rate: float = 0.05
    dropout: float = 0.05
    max_epochs: int = 100
    seed: int = 0
    patience: int = 15          # 0 disables early stopping on stagnation
    clip: float = 5.0           # 0 disables gradient-norm clipping
    init: str = "scaled"        # paper-faithful runs use "uniform" (+-1)
    freeze_embeddings: bool = False
    min_count: int = 1

    def validate(self, paper_faithful=False):
        if self.hidden < 1 or self.d < 1:
            raise ConfigError("hidden and d must be positive")
        if self.window < 1 or self.window % 2 == 0:
            raise ConfigError(f"window must be odd and positive, got {self.window}")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if self.max_epochs < 0 or self.patience < 0 or self.clip < 0 or self.min_count < 1:
            raise ConfigError("max_epochs, patience and clip must be non-negative, min_count >= 1")
        if self.init not in INIT_MODES:
            raise ConfigError(f"init must be one of {INIT_MODES}")
        if paper_faithful:
            lo, hi = RATE_RANGE
            problems = []
            if self.hidden not in HIDDEN_GRID:
                problems.append(f"hidden={self.hidden} not in {HIDDEN_GRID}")
            if self.window not in WINDOW_GRID:
                problems.append(f"window={self.window} not in {WINDOW_GRID}")
            if self.d not in DIM_GRID:
                problems.append(f"d={self.d} not in {DIM_GRID}")
            if not lo <= self.learning_rate <= hi:
                problems.append(f"learning_rate={self.learning_rate} outside [{lo}, {hi}]")
            if not lo <= self.dropout <= hi:
                problems.append(f"dropout={self.dropout} outside [{lo}, {hi}]")
            if self.init != "uniform":
                problems.append("init must be 'uniform'")
            if problems:
                raise ConfigError("paper-faithful mode: " + "; ".join(problems))
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, values):
        """Build from a dict whose values may be strings (config files)."""
        kw = {}
        names = {f.name: f for f in fields(cls)}
        for key, value in values.items():
            if key not in names:
                raise ConfigError(f"unknown hyperparameter {key!r}")
            kind = type(getattr(cls(), key))
            try:
                if kind is bool and isinstance(value, str):
                    kw[key] = parse_bool(value)
                else:
                    kw[key] = kind(value)
            except (TypeError, ValueError):
                raise ConfigError(f"bad value for {key}: {value!r}") from None
        return cls(**kw)


def sample_hyperparams(seed, base=None):
    """Draw H, s, d uniformly from their grids and both rates uniformly
    from [0.05, 0.1]; other fields come from ``base``."""
    rng = np.random.default_rng(seed)
    base = base or HyperParams()
    return replace(
        base,
        hidden=int(rng.choice(HIDDEN_GRID)),
        window=int(rng.choice(WINDOW_GRID)),
        d=int(rng.choice(DIM_GRID)),
        learning_rate=float(rng.uniform(*RATE_RANGE)),
        dropout=float(rng.uniform(*RATE_RANGE)),
        seed=int(seed),
    )


def _streams(seed):
    init, emb, shuffle, dropout = np.random.SeedSequence(seed).spawn(4)
    return (np.random.default_rng(init), np.random.default_rng(emb),
            np.random.default_rng(shuffle), np.random.default_rng(dropout))


def init_model(corpus, hp, pretrained=None, tagset=None):
    dim = pretrained_dim(pretrained)
    if dim is not None and dim != hp.d:
        raise ConfigError(f"pretrained vectors have d={dim} but hyperparameters say d={hp.d}")
    init_rng, emb_rng, _, _ = _streams(hp.seed)
    tagset = tagset or corpus.tagset
    vocab = build_vocab(corpus, hp.min_count)
    table = assemble_table(vocab, pretrained, hp.d, int(emb_rng.integers(2**63)))
    bilstm = BiLstmParams.init(hp.window * hp.d, hp.hidden, len(tagset), init_rng, hp.init)
    return ModelParams(tagset, vocab, table, bilstm, CrfParams.zeros(len(tagset)), hp)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    valid_f1: float
    timestamp: float = field(default=0.0, compare=False)

    def to_json(self):
        return json.dumps(asdict(self))


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    best_epoch: int | None = None

    @property
    def best_f1(self):
        if self.best_epoch is None:
            return None
        return self.records[self.best_epoch - 1].valid_f1

    def to_lines(self):
        return "".join(r.to_json() + "\n" for r in self.records)


def sgd_step(model, grads, lr, clip=5.0, freeze_embeddings=False):
    """In-place SGD update; returns the pre-clipping gradient norm."""
    rows, emb_grads = grads["embeddings"]
    dense = [(name, g) for name, g in grads.items() if name != "embeddings"]
    sq = sum(float(np.vdot(g, g)) for _, g in dense)
    if not freeze_embeddings:
        sq += float(np.vdot(emb_grads, emb_grads))
    norm = np.sqrt(sq)
    step = lr
    if clip and norm > clip:
        step = lr * clip / norm
    arrays = model.arrays()
    for name, g in dense:
        arrays[name] -= step * g
    if not freeze_embeddings and len(rows):
        model.embeddings.matrix[rows] -= step * emb_grads
        model.embeddings.matrix[PAD_ID] = 0.0
    model.bilstm.touch()
    return norm


def evaluate_model(model, corpus, constrain=True):
    pred = tag(model, corpus, constrain=constrain)
    return strict_score(corpus, pred)


def train(train_corpus, valid_corpus, hp, pretrained=None, on_epoch=None):
    """Train from scratch; returns ``(best_model, history)``.

    Validation strict micro-F1 is measured with IOB2-constrained decoding
    after each epoch and the best-scoring epoch's parameters are kept
    (earliest wins ties).
    """
    hp.validate()
    if len(train_corpus) == 0:
        raise ConfigError("training corpus is empty")
    if not train_corpus.labeled or not valid_corpus.labeled:
        raise ConfigError("training and validation corpora must be labeled")
    if train_corpus.tagset != valid_corpus.tagset:
        raise ConfigError("training and validation corpora use different tag sets")
    if len(valid_corpus) == 0 and hp.max_epochs > 0:
        raise ConfigError("validation corpus is empty")

    model = init_model(train_corpus, hp, pretrained)
    _, _, shuffle_rng, dropout_rng = _streams(hp.seed)
    history = TrainHistory()
    best = model.copy()
    encoded = [(model.encode(s), np.asarray(s.tags)) for s in train_corpus]
    keep = 1.0 - hp.dropout
    width = 2 * hp.hidden
    stale = 0

    for epoch in range(1, hp.max_epochs + 1):
        total = 0.0
        for idx in shuffle_rng.permutation(len(encoded)):
            win, gold = encoded[idx]
            mask = None
            if hp.dropout > 0:
                mask = dropout_rng.random((len(gold), width)) < keep
            loss, grads = loss_and_grads(model, win, gold, mask, keep)
            if not np.isfinite(loss):
                raise DivergenceError(epoch)
            sgd_step(model, grads, hp.learning_rate, hp.clip, hp.freeze_embeddings)
            total += loss
        if not np.all(np.isfinite(model.bilstm.proj_W)):
            raise DivergenceError(epoch, "non-finite parameters")
        f1 = evaluate_model(model, valid_corpus).f1
        rec = EpochRecord(epoch, total / len(encoded), f1, time.time())
        history.records.append(rec)
        log.info("epoch %d loss %.4f valid_f1 %.4f", epoch, rec.loss, f1)
        if on_epoch is not None:
            on_epoch(rec)
        if history.best_epoch is None or f1 > history.best_f1:
            history.best_epoch = epoch
            best = model.copy()
            stale = 0
        else:
            stale += 1
            if hp.patience and stale >= hp.patience:
                log.info("no improvement for %d epochs, stopping", stale)
                break
    return best, history


@dataclass
class SearchTrial:
    trial: int
    hparams: HyperParams
    best_epoch: int | None
    valid_f1: float | None

    def to_json(self):
        return json.dumps({"trial": self.trial, "best_epoch": self.best_epoch,
                           "valid_f1": self.valid_f1, **self.hparams.to_dict()})


def hyper_search(train_corpus, valid_corpus, n_trials, seed, base=None, pretrained=None,
                 paper_faithful=False, on_trial=None):
    """Random search over the hyperparameter grids.

    Returns ``(best_model, best_history, trials)``; the best trial has the
    highest validation F1, earliest trial on ties.
    """
    if n_trials < 1:
        raise ConfigError("hyper-search needs at least one trial")
    base = base or HyperParams()
    dim = pretrained_dim(pretrained)
    trial_seeds = np.random.default_rng(seed).integers(0, 2**31 - 1, size=n_trials)
    trials = []
    best = None
    for k, trial_seed in enumerate(trial_seeds):
        hp = sample_hyperparams(int(trial_seed), base)
        if dim is not None:
            hp = replace(hp, d=dim)
        hp.validate(paper_faithful)
        model, history = train(train_corpus, valid_corpus, hp, pretrained)
        trial = SearchTrial(k, hp, history.best_epoch, history.best_f1)
        trials.append(trial)
        log.info("trial %d: %s -> valid_f1 %s", k, hp, trial.valid_f1)
        if on_trial is not None:
            on_trial(trial)
        score = -1.0 if trial.valid_f1 is None else trial.valid_f1
        if best is None or score > best[0]:
            best = (score, model, history)
    return best[1], best[2], trials
