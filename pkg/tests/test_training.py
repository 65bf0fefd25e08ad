import dataclasses

import numpy as np
import pytest

from bilstm_crf.container import dumps, models_equal
from bilstm_crf.corpus import LabeledCorpus, Sentence, SynthSpec, split_corpus, synth_corpus
from bilstm_crf.embeddings import PAD_ID
from bilstm_crf.errors import ConfigError, DivergenceError
from bilstm_crf.model import loss_and_grads
from bilstm_crf.training import (DIM_GRID, HIDDEN_GRID, WINDOW_GRID, HyperParams, hyper_search,
                                 init_model, sample_hyperparams, sgd_step, train)

SMALL = HyperParams(hidden=4, window=3, d=5, max_epochs=3, seed=1)


@pytest.fixture(scope="module")
def small_split():
    corpus = synth_corpus(SynthSpec(n_sentences=30, min_length=3, max_length=8), 5)
    return split_corpus(corpus, 0.7, 0)


def test_sample_hyperparams_grids():
    for seed in range(200):
        hp = sample_hyperparams(seed)
        assert hp.hidden in HIDDEN_GRID and hp.window in WINDOW_GRID and hp.d in DIM_GRID
        assert 0.05 <= hp.learning_rate <= 0.1 and 0.05 <= hp.dropout <= 0.1
    assert sample_hyperparams(42) == sample_hyperparams(42)
    assert sample_hyperparams(42) != sample_hyperparams(43)


def test_sample_hyperparams_keeps_base_fields():
    base = HyperParams(max_epochs=7, patience=2, init="uniform")
    hp = sample_hyperparams(3, base)
    assert (hp.max_epochs, hp.patience, hp.init, hp.seed) == (7, 2, "uniform", 3)
    hp.validate(paper_faithful=True)


def test_validate_paper_faithful_rejections():
    with pytest.raises(ConfigError, match="hidden"):
        HyperParams(hidden=30, init="uniform").validate(paper_faithful=True)
    with pytest.raises(ConfigError, match="learning_rate"):
        HyperParams(learning_rate=0.2, init="uniform").validate(paper_faithful=True)
    with pytest.raises(ConfigError, match="init"):
        HyperParams(init="scaled").validate(paper_faithful=True)
    HyperParams(hidden=30, learning_rate=0.2).validate()
    with pytest.raises(ConfigError):
        HyperParams(window=2).validate()


def test_hyperparams_from_dict():
    hp = HyperParams.from_dict({"hidden": "25", "learning_rate": "0.07",
                                "freeze_embeddings": "true"})
    assert hp.hidden == 25 and hp.learning_rate == 0.07 and hp.freeze_embeddings
    with pytest.raises(ConfigError):
        HyperParams.from_dict({"nope": "1"})


def test_zero_epochs_returns_initial_model(small_split):
    tr, va = small_split
    hp = dataclasses.replace(SMALL, max_epochs=0)
    model, history = train(tr, va, hp)
    assert history.records == [] and history.best_epoch is None
    assert models_equal(model, init_model(tr, hp))


def test_training_is_deterministic(small_split):
    tr, va = small_split
    m1, h1 = train(tr, va, SMALL)
    m2, h2 = train(tr, va, SMALL)
    assert h1 == h2
    assert dumps(m1) == dumps(m2)


def test_best_epoch_is_earliest_maximum(small_split):
    tr, va = small_split
    _, h = train(tr, va, dataclasses.replace(SMALL, max_epochs=6, patience=0))
    f1s = [r.valid_f1 for r in h.records]
    assert h.best_epoch == f1s.index(max(f1s)) + 1
    assert h.best_f1 == max(f1s)


def test_patience_stops_early(small_split):
    tr, va = small_split
    hp = dataclasses.replace(SMALL, max_epochs=50, patience=2, learning_rate=1e-9)
    _, h = train(tr, va, hp)
    assert len(h.records) == h.best_epoch + 2


def test_single_sentence_loss_non_increasing():
    # Empirical sanity property on a fixed fixture; no convexity is claimed.
    corpus = LabeledCorpus((Sentence(("His", "HCT", "had", "dropped"), (3, 4, 0, 0)),),
                           synth_corpus(SynthSpec(n_sentences=1), 0).tagset)
    hp = HyperParams(hidden=5, window=3, d=4, learning_rate=0.01, dropout=0.0,
                     max_epochs=10, patience=0, seed=3)
    _, h = train(corpus, corpus, hp)
    losses = [r.loss for r in h.records]
    assert all(b <= a for a, b in zip(losses, losses[1:])), losses


def test_pad_row_stays_zero_and_frozen_embeddings(small_split):
    tr, va = small_split
    model, _ = train(tr, va, SMALL)
    assert np.all(model.embeddings.matrix[PAD_ID] == 0)
    frozen, _ = train(tr, va, dataclasses.replace(SMALL, freeze_embeddings=True))
    np.testing.assert_array_equal(frozen.embeddings.matrix,
                                  init_model(tr, SMALL).embeddings.matrix)
    assert not np.array_equal(frozen.bilstm.proj_W, init_model(tr, SMALL).bilstm.proj_W)


def test_sgd_step_clips_global_norm(small_split):
    tr, _ = small_split
    model = init_model(tr, SMALL)
    before = {k: v.copy() for k, v in model.arrays().items()}
    s = tr.sentences[0]
    _, grads = loss_and_grads(model, model.encode(s), np.array(s.tags))
    norm = sgd_step(model, grads, lr=1.0, clip=1e-3)
    assert norm > 1e-3
    moved_sq = sum(float(np.sum((model.arrays()[k] - before[k]) ** 2)) for k in before)
    assert np.sqrt(moved_sq) == pytest.approx(1e-3, rel=1e-9)


def test_divergence_reports_epoch(small_split):
    tr, va = small_split
    hp = dataclasses.replace(SMALL, learning_rate=1e305, clip=0.0, init="uniform")
    with np.errstate(all="ignore"), pytest.raises(DivergenceError) as exc:
        train(tr, va, hp)
    assert exc.value.epoch >= 1


def test_training_errors(small_split):
    tr, va = small_split
    with pytest.raises(ConfigError):
        train(LabeledCorpus((), tr.tagset), va, SMALL)
    with pytest.raises(ConfigError):
        train(tr, va, SMALL, pretrained={"x": np.zeros(3)})


def test_pretrained_vectors_are_used(small_split):
    tr, va = small_split
    pre = {tok: np.full(5, 0.25) for tok in ("w001", "problem003")}
    model = init_model(tr, SMALL, pre)
    row = model.vocab.lookup("w001")
    np.testing.assert_array_equal(model.embeddings.matrix[row], 0.25)
    assert model.embeddings.pretrained[row]


def test_hyper_search_selects_best(small_split):
    tr, va = small_split
    base = HyperParams(max_epochs=1, init="uniform")
    pre = {"w001": np.zeros(3)}
    model, history, trials = hyper_search(tr, va, 3, seed=4, base=base, pretrained=pre,
                                          paper_faithful=False)
    assert len(trials) == 3
    assert all(t.hparams.d == 3 for t in trials)
    best = max(range(3), key=lambda k: (trials[k].valid_f1, -k))
    assert model.hparams == trials[best].hparams
    assert history.best_f1 == trials[best].valid_f1
