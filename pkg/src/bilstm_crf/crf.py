"""Linear-chain CRF over emission scores.

Transitions live in a single (K+2) x (K+2) matrix; index ``K`` is the
virtual START state and ``K+1`` the virtual STOP state. ``A[i, j]``
scores moving from tag ``i`` to tag ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DecodeError

NEG_INF = -np.inf


def logsumexp(x, axis=None):
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True)) + m
    return out.item() if axis is None else np.squeeze(out, axis=axis)


@dataclass
class CrfParams:
    transitions: np.ndarray

    @property
    def num_tags(self):
        return self.transitions.shape[0] - 2

    @property
    def start(self):
        return self.num_tags

    @property
    def stop(self):
        return self.num_tags + 1

    @classmethod
    def zeros(cls, num_tags):
        return cls(np.zeros((num_tags + 2, num_tags + 2)))

    def parts(self):
        """``(start_scores, pair_scores, stop_scores)`` views."""
        K = self.num_tags
        A = self.transitions
        return A[K, :K], A[:K, :K], A[:K, K + 1]


@dataclass
class DecodedPath:
    tags: list
    score: float


def _check_tags(tags, K):
    for t in tags:
        if not 0 <= t < K:
            raise IndexError(f"tag index {t} out of range for K={K}")


def score_sequence(emissions, crf, tags):
    E = np.asarray(emissions)
    T, K = E.shape
    if len(tags) != T:
        raise ValueError(f"{len(tags)} tags for {T} positions")
    _check_tags(tags, K)
    A = crf.transitions
    score = A[crf.start, tags[0]] + A[tags[-1], crf.stop]
    for t in range(T):
        score += E[t, tags[t]]
    for t in range(T - 1):
        score += A[tags[t], tags[t + 1]]
    return float(score)


def _forward(E, crf):
    start, pair, _ = crf.parts()
    T, K = E.shape
    alpha = np.empty((T, K))
    alpha[0] = start + E[0]
    for t in range(1, T):
        alpha[t] = E[t] + logsumexp(alpha[t - 1][:, None] + pair, axis=0)
    return alpha


def _backward(E, crf):
    _, pair, stop = crf.parts()
    T, K = E.shape
    beta = np.empty((T, K))
    beta[-1] = stop
    for t in range(T - 2, -1, -1):
        beta[t] = logsumexp(pair + (E[t + 1] + beta[t + 1])[None, :], axis=1)
    return beta


def log_partition(emissions, crf):
    E = np.asarray(emissions, dtype=np.float64)
    _, _, stop = crf.parts()
    return logsumexp(_forward(E, crf)[-1] + stop)


def marginals(emissions, crf):
    """Per-position tag marginals (T x K), pairwise marginals
    ((T-1) x K x K) and the log-partition."""
    E = np.asarray(emissions, dtype=np.float64)
    _, pair, stop = crf.parts()
    alpha = _forward(E, crf)
    beta = _backward(E, crf)
    logz = logsumexp(alpha[-1] + stop)
    unary = np.exp(alpha + beta - logz)
    pairwise = np.exp(alpha[:-1, :, None] + pair[None] + (E[1:] + beta[1:])[:, None, :] - logz)
    return unary, pairwise, logz


def crf_nll_and_grad(emissions, crf, gold):
    """Negative log-likelihood of ``gold`` and its gradients.

    Returns ``(loss, d_emissions, d_transitions)``.
    """
    E = np.asarray(emissions, dtype=np.float64)
    T, K = E.shape
    unary, pairwise, logz = marginals(E, crf)
    loss = max(logz - score_sequence(E, crf, gold), 0.0)

    dE = unary.copy()
    dE[np.arange(T), gold] -= 1.0
    dA = np.zeros_like(crf.transitions)
    dA[crf.start, :K] = unary[0]
    dA[:K, crf.stop] = unary[-1]
    dA[:K, :K] = pairwise.sum(axis=0)
    dA[crf.start, gold[0]] -= 1.0
    dA[gold[-1], crf.stop] -= 1.0
    for t in range(T - 1):
        dA[gold[t], gold[t + 1]] -= 1.0
    return float(loss), dE, dA


def _split_mask(mask, K):
    mask = np.asarray(mask, dtype=bool)
    if mask.shape == (K, K):
        return np.ones(K, bool), mask, np.ones(K, bool)
    if mask.shape == (K + 2, K + 2):
        return mask[K, :K], mask[:K, :K], mask[:K, K + 1]
    raise ValueError(f"mask must be {K}x{K} or {K + 2}x{K + 2}, got {mask.shape}")


def viterbi(emissions, crf, mask=None):
    """Highest-scoring path.

    At every backtrack decision the lowest tag index wins among ties.
    ``mask`` is a boolean matrix of allowed transitions, either K x K or
    the full (K+2) x (K+2) layout including START/STOP.
    """
    E = np.asarray(emissions, dtype=np.float64)
    T, K = E.shape
    start, pair, stop = crf.parts()
    if mask is not None:
        ok_start, ok_pair, ok_stop = _split_mask(mask, K)
        start = np.where(ok_start, start, NEG_INF)
        pair = np.where(ok_pair, pair, NEG_INF)
        stop = np.where(ok_stop, stop, NEG_INF)

    delta = start + E[0]
    back = np.zeros((T, K), dtype=np.int64)
    for t in range(1, T):
        cand = delta[:, None] + pair
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(K)] + E[t]
    final = delta + stop
    last = int(np.argmax(final))
    if final[last] == NEG_INF:
        raise DecodeError("transition mask admits no tag path")
    path = [last]
    for t in range(T - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    return DecodedPath(path, score_sequence(E, crf, path))


def iob2_mask(tagset):
    """(K+2) x (K+2) allowed-transition matrix enforcing IOB2."""
    K = len(tagset)
    mask = np.ones((K + 2, K + 2), dtype=bool)
    mask[:, K] = False          # nothing enters START
    mask[K + 1, :] = False      # nothing leaves STOP
    mask[K, K + 1] = False      # empty sentences are not paths
    for j in range(K):
        if tagset.is_inside(j):
            cls = tagset.class_of(j)
            for i in range(K + 2):
                mask[i, j] = i < K and i > 0 and tagset.class_of(i) == cls
    return mask
