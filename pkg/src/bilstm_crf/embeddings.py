"""Vocabulary, pretrained-vector loading, embedding tables and context
windows."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmbeddingFormatError

PAD = "<pad>"
UNK = "<unk>"
PAD_ID = 0
UNK_ID = 1


class Vocabulary:
    """Token <-> index map with PAD at 0 and UNK at 1."""

    def __init__(self, tokens=()):
        self.itos = [PAD, UNK]
        self.stoi = {PAD: PAD_ID, UNK: UNK_ID}
        for tok in tokens:
            if tok in self.stoi:
                raise ValueError(f"duplicate vocabulary entry {tok!r}")
            self.stoi[tok] = len(self.itos)
            self.itos.append(tok)

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def __repr__(self):
        return f"Vocabulary(size={len(self)})"

    @property
    def tokens(self):
        """Non-reserved entries in index order."""
        return self.itos[2:]

    def lookup(self, token):
        return self.stoi.get(token, UNK_ID)

    def encode(self, tokens):
        return np.array([self.stoi.get(t, UNK_ID) for t in tokens], dtype=np.int64)


def build_vocab(corpus, min_count=1):
    counts = Counter(tok for s in corpus for tok in s.tokens)
    kept = sorted((t for t, n in counts.items() if n >= min_count),
                  key=lambda t: (-counts[t], t))
    return Vocabulary(t for t in kept if t not in (PAD, UNK))


def _is_int(s):
    try:
        int(s)
    except ValueError:
        return False
    return True


def load_pretrained(stream, expected_d=None):
    """Read GloVe- or word2vec-style text vectors into a ``{token: vector}`` map.

    A leading ``count dim`` line (word2vec layout) is detected and
    skipped. The first occurrence of a duplicated token wins.
    """
    text = stream if isinstance(stream, str) else stream.read()
    vectors = {}
    d = None
    for lineno, raw in enumerate(text.split("\n"), start=1):
        fields = raw.split()
        if not fields:
            continue
        if lineno == 1 and len(fields) == 2 and _is_int(fields[0]) and _is_int(fields[1]):
            continue
        token, values = fields[0], fields[1:]
        if not values:
            raise EmbeddingFormatError(f"token {token!r} has no vector", lineno)
        if d is None:
            d = len(values)
            if expected_d is not None and d != expected_d:
                raise EmbeddingFormatError(
                    f"vector dimension {d} does not match expected {expected_d}", lineno)
        elif len(values) != d:
            raise EmbeddingFormatError(
                f"vector has {len(values)} components, expected {d}", lineno)
        try:
            vec = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError as exc:
            raise EmbeddingFormatError(f"non-numeric component ({exc})", lineno) from None
        if token not in vectors:
            vectors[token] = vec
    return vectors


def load_pretrained_file(path, expected_d=None):
    with open(path, encoding="utf-8") as fh:
        return load_pretrained(fh, expected_d)


def pretrained_dim(pretrained):
    return next(iter(pretrained.values())).shape[0] if pretrained else None


@dataclass
class EmbeddingTable:
    matrix: np.ndarray          # |V| x d, float64
    pretrained: np.ndarray      # |V| bool, True where the row came from a pretrained map

    @property
    def d(self):
        return self.matrix.shape[1]

    def coverage(self):
        """Fraction of non-reserved rows initialized from pretrained vectors."""
        n = len(self.pretrained) - 2
        return float(self.pretrained[2:].sum()) / n if n > 0 else 0.0


def assemble_table(vocab, pretrained, d, seed):
    """Pretrained rows where available (exact token, then lowercased),
    uniform [-1, 1] draws elsewhere, zero PAD row."""
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(-1.0, 1.0, size=(len(vocab), d))
    from_pretrained = np.zeros(len(vocab), dtype=bool)
    pretrained = pretrained or {}
    for i, tok in enumerate(vocab.itos):
        if i < 2:
            continue
        vec = pretrained.get(tok)
        if vec is None:
            vec = pretrained.get(tok.lower())
        if vec is not None:
            if vec.shape != (d,):
                raise EmbeddingFormatError(
                    f"pretrained vector for {tok!r} has dimension {vec.shape[0]}, expected {d}")
            matrix[i] = vec
            from_pretrained[i] = True
    matrix[PAD_ID] = 0.0
    return EmbeddingTable(matrix, from_pretrained)


@dataclass(frozen=True)
class WindowConfig:
    size: int = 3

    def __post_init__(self):
        if self.size < 1 or self.size % 2 == 0:
            raise ConfigError(f"context window size must be odd and positive, got {self.size}")

    @property
    def radius(self):
        return (self.size - 1) // 2


def window_ids(token_ids, size):
    """T x size matrix of vocabulary ids, PAD outside the sentence."""
    token_ids = np.asarray(token_ids, dtype=np.int64)
    r = (size - 1) // 2
    padded = np.concatenate([np.full(r, PAD_ID), token_ids, np.full(r, PAD_ID)])
    T = len(token_ids)
    return np.stack([padded[k:k + T] for k in range(size)], axis=1)


def gather_windows(matrix, win):
    """Concatenate embedding rows per window: T x (size * d)."""
    T, s = win.shape
    return matrix[win].reshape(T, s * matrix.shape[1])


def window_features(sentence, vocab, table, cfg):
    ids = vocab.encode(sentence.tokens)
    return gather_windows(table.matrix, window_ids(ids, cfg.size))


def scatter_window_grads(win, d_inputs, d):
    """Route input-feature gradients back to embedding rows.

    Returns ``(row_ids, grads)`` with one gradient row per distinct id,
    summing the contributions of every window slot the id occupies. PAD
    is excluded since its row stays fixed at zero.
    """
    T, s = win.shape
    flat_ids = win.reshape(-1)
    flat_grads = d_inputs.reshape(T * s, d)
    rows, inverse = np.unique(flat_ids, return_inverse=True)
    grads = np.zeros((len(rows), d))
    np.add.at(grads, inverse, flat_grads)
    keep = rows != PAD_ID
    return rows[keep], grads[keep]
