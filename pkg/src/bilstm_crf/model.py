"""Full tagger: embeddings -> context windows -> BiLSTM -> CRF."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from . import crf as crf_mod
from .corpus import LabeledCorpus, Sentence
from .embeddings import EmbeddingTable, gather_windows, scatter_window_grads, window_ids
from .errors import ConfigError
from .network import BiLstmParams, forward_bilstm, network_backward, project


@dataclass
class ModelParams:
    tagset: object
    vocab: object
    embeddings: EmbeddingTable
    bilstm: BiLstmParams
    crf: crf_mod.CrfParams
    hparams: object

    def __post_init__(self):
        self.check()

    def check(self):
        V, d = self.embeddings.matrix.shape
        K = len(self.tagset)
        s = self.hparams.window
        if V != len(self.vocab):
            raise ConfigError(f"embedding rows ({V}) != vocabulary size ({len(self.vocab)})")
        if self.embeddings.pretrained.shape != (V,):
            raise ConfigError("embedding provenance mask has wrong length")
        if d != self.hparams.d:
            raise ConfigError(f"embedding dimension {d} != hyperparameter d={self.hparams.d}")
        if self.bilstm.input_size != s * d:
            raise ConfigError(f"LSTM input width {self.bilstm.input_size} != s*d = {s * d}")
        if self.bilstm.hidden_size != self.hparams.hidden:
            raise ConfigError("LSTM hidden size disagrees with hyperparameters")
        if self.bilstm.num_tags != K or self.crf.num_tags != K:
            raise ConfigError(f"tag count mismatch: tagset has K={K}")

    def arrays(self):
        """Every learnable tensor by name (live references)."""
        out = {"embeddings": self.embeddings.matrix}
        out.update(self.bilstm.arrays())
        out["crf.transitions"] = self.crf.transitions
        return out

    def copy(self):
        return copy.deepcopy(self)

    def encode(self, sentence):
        return window_ids(self.vocab.encode(sentence.tokens), self.hparams.window)


def emissions(model, win):
    X = gather_windows(model.embeddings.matrix, win)
    hidden, _ = forward_bilstm(model.bilstm, X)
    return project(model.bilstm, hidden)


def loss_and_grads(model, win, gold, dropout_mask=None, keep_prob=1.0):
    """CRF negative log-likelihood of ``gold`` and gradients for every
    parameter. Embedding gradients come back sparse as
    ``grads["embeddings"] = (row_ids, rows)``; PAD is never included."""
    X = gather_windows(model.embeddings.matrix, win)
    hidden, cache = forward_bilstm(model.bilstm, X)
    E = project(model.bilstm, hidden, dropout_mask, keep_prob, cache=cache)
    loss, dE, dA = crf_mod.crf_nll_and_grad(E, model.crf, gold)
    grads = network_backward(cache, dE)
    d_inputs = grads.pop("inputs")
    grads["embeddings"] = scatter_window_grads(win, d_inputs, model.embeddings.d)
    grads["crf.transitions"] = dA
    return loss, grads


def decode(model, sentence, constrain=False, mask=None):
    E = emissions(model, model.encode(sentence))
    if constrain and mask is None:
        mask = crf_mod.iob2_mask(model.tagset)
    return crf_mod.viterbi(E, model.crf, mask if constrain else None).tags


def tag(model, sentences, constrain=True):
    """Decode every sentence; returns a corpus carrying predicted tags."""
    mask = crf_mod.iob2_mask(model.tagset) if constrain else None
    out = [Sentence(s.tokens, tuple(decode(model, s, constrain, mask))) for s in sentences]
    return LabeledCorpus(tuple(out), model.tagset)
