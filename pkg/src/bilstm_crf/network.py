"""Bidirectional LSTM encoder and linear emission projection.

Gate parameters are stored stacked in the order input, forget, output,
candidate: ``W`` is 4H x D, ``U`` is 4H x H and ``b`` has length 4H.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, StaleCacheError

INIT_MODES = ("uniform", "scaled")


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class LstmCellParams:
    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        H4, D = self.W.shape
        if H4 % 4 or self.U.shape != (H4, H4 // 4) or self.b.shape != (H4,):
            raise ConfigError(
                f"inconsistent LSTM shapes W{self.W.shape} U{self.U.shape} b{self.b.shape}")

    @property
    def hidden_size(self):
        return self.U.shape[1]

    @property
    def input_size(self):
        return self.W.shape[1]

    def gate(self, name):
        """Slice views ``(W_x, U_x, b_x)`` for gate ``i``, ``f``, ``o`` or ``g``."""
        k = "ifog".index(name)
        H = self.hidden_size
        sl = slice(k * H, (k + 1) * H)
        return self.W[sl], self.U[sl], self.b[sl]

    @classmethod
    def zeros(cls, input_size, hidden_size):
        H = hidden_size
        return cls(np.zeros((4 * H, input_size)), np.zeros((4 * H, H)), np.zeros(4 * H))

    @classmethod
    def init(cls, input_size, hidden_size, rng, mode="uniform"):
        H = hidden_size
        W = _uniform(rng, (4 * H, input_size), mode)
        U = _uniform(rng, (4 * H, H), mode)
        b = np.zeros(4 * H)
        b[H:2 * H] = 1.0
        return cls(W, U, b)


def _uniform(rng, shape, mode):
    if mode == "uniform":
        limit = 1.0
    elif mode == "scaled":
        limit = 1.0 / np.sqrt(shape[1])
    else:
        raise ConfigError(f"unknown init mode {mode!r}; expected one of {INIT_MODES}")
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class BiLstmParams:
    forward: LstmCellParams
    backward: LstmCellParams
    proj_W: np.ndarray          # K x 2H
    proj_b: np.ndarray          # K
    generation: int = field(default=0, compare=False)

    def __post_init__(self):
        H = self.forward.hidden_size
        if (self.backward.hidden_size != H
                or self.backward.input_size != self.forward.input_size
                or self.proj_W.shape[1] != 2 * H
                or self.proj_b.shape != (self.proj_W.shape[0],)):
            raise ConfigError("inconsistent BiLSTM parameter shapes")

    @property
    def hidden_size(self):
        return self.forward.hidden_size

    @property
    def input_size(self):
        return self.forward.input_size

    @property
    def num_tags(self):
        return self.proj_W.shape[0]

    def arrays(self):
        """Named parameter arrays (live references, in serialization order)."""
        return {
            "fw.W": self.forward.W, "fw.U": self.forward.U, "fw.b": self.forward.b,
            "bw.W": self.backward.W, "bw.U": self.backward.U, "bw.b": self.backward.b,
            "proj.W": self.proj_W, "proj.b": self.proj_b,
        }

    def touch(self):
        """Mark parameters as modified; invalidates outstanding caches."""
        self.generation += 1

    @classmethod
    def init(cls, input_size, hidden_size, num_tags, rng, mode="uniform"):
        fw = LstmCellParams.init(input_size, hidden_size, rng, mode)
        bw = LstmCellParams.init(input_size, hidden_size, rng, mode)
        proj_W = _uniform(rng, (num_tags, 2 * hidden_size), mode)
        return cls(fw, bw, proj_W, np.zeros(num_tags))

    @classmethod
    def zeros(cls, input_size, hidden_size, num_tags):
        return cls(LstmCellParams.zeros(input_size, hidden_size),
                   LstmCellParams.zeros(input_size, hidden_size),
                   np.zeros((num_tags, 2 * hidden_size)), np.zeros(num_tags))


def lstm_step(cell, x, h_prev, c_prev):
    """One LSTM transition without peepholes; returns ``(h, c)``."""
    H = cell.hidden_size
    a = cell.W @ x + cell.U @ h_prev + cell.b
    i = sigmoid(a[:H])
    f = sigmoid(a[H:2 * H])
    o = sigmoid(a[2 * H:3 * H])
    g = np.tanh(a[3 * H:])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


def _run_cell(cell, X):
    T = X.shape[0]
    H = cell.hidden_size
    pre = X @ cell.W.T + cell.b
    gates = np.empty((T, 4 * H))     # activated i, f, o, g
    hs = np.zeros((T + 1, H))        # hs[t + 1] is h at step t
    cs = np.zeros((T + 1, H))
    for t in range(T):
        a = pre[t] + cell.U @ hs[t]
        act = gates[t]
        act[:3 * H] = sigmoid(a[:3 * H])
        act[3 * H:] = np.tanh(a[3 * H:])
        cs[t + 1] = act[H:2 * H] * cs[t] + act[:H] * act[3 * H:]
        hs[t + 1] = act[2 * H:3 * H] * np.tanh(cs[t + 1])
    return hs, cs, gates


def _cell_backward(cell, X, hs, cs, gates, dH):
    T = X.shape[0]
    H = cell.hidden_size
    dA = np.empty((T, 4 * H))
    dU = np.zeros_like(cell.U)
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in range(T - 1, -1, -1):
        i, f = gates[t, :H], gates[t, H:2 * H]
        o, g = gates[t, 2 * H:3 * H], gates[t, 3 * H:]
        tc = np.tanh(cs[t + 1])
        dh = dH[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        da = dA[t]
        da[:H] = dc * g * i * (1.0 - i)
        da[H:2 * H] = dc * cs[t] * f * (1.0 - f)
        da[2 * H:3 * H] = dh * tc * o * (1.0 - o)
        da[3 * H:] = dc * i * (1.0 - g * g)
        dU += np.outer(da, hs[t])
        dh_next = cell.U.T @ da
        dc_next = dc * f
    return {"W": dA.T @ X, "U": dU, "b": dA.sum(axis=0)}, dA @ cell.W


@dataclass
class BiLstmCache:
    params: BiLstmParams
    generation: int
    inputs: np.ndarray
    fw: tuple
    bw: tuple
    hidden: np.ndarray
    dropped: np.ndarray | None = None
    mask_scale: np.ndarray | None = None


def forward_bilstm(params, inputs):
    """Run both directions from zero states; returns ``(hidden, cache)``
    with ``hidden[t] = [h_fw(t), h_bw(t)]``."""
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] != params.input_size:
        raise ConfigError(f"expected T x {params.input_size} inputs with T >= 1, got {X.shape}")
    fw = _run_cell(params.forward, X)
    bw = _run_cell(params.backward, X[::-1])
    hidden = np.concatenate([fw[0][1:], bw[0][1:][::-1]], axis=1)
    return hidden, BiLstmCache(params, params.generation, X, fw, bw, hidden)


def project(params, hidden, dropout_mask=None, keep_prob=1.0, cache=None):
    """Emission scores; inverted dropout on ``hidden`` when a mask is given."""
    if not 0.0 < keep_prob <= 1.0:
        raise ConfigError(f"keep_prob must be in (0, 1], got {keep_prob}")
    if dropout_mask is not None:
        scale = np.asarray(dropout_mask, dtype=np.float64) / keep_prob
        h = hidden * scale
    else:
        scale = None
        h = hidden
    if cache is not None:
        cache.dropped = h
        cache.mask_scale = scale
    return h @ params.proj_W.T + params.proj_b


def network_backward(cache, d_emissions):
    """Gradients for every BiLSTM parameter plus ``"inputs"`` (T x D)."""
    params = cache.params
    if cache.generation != params.generation:
        raise StaleCacheError("parameters changed since the forward pass")
    if cache.dropped is None:
        raise StaleCacheError("cache has no projection record; call project(..., cache=cache)")
    T = cache.inputs.shape[0]
    dE = np.asarray(d_emissions, dtype=np.float64)
    if dE.shape != (T, params.num_tags):
        raise StaleCacheError(f"d_emissions shape {dE.shape} does not match cache ({T}, {params.num_tags})")
    H = params.hidden_size
    grads = {"proj.W": dE.T @ cache.dropped, "proj.b": dE.sum(axis=0)}
    dhidden = dE @ params.proj_W
    if cache.mask_scale is not None:
        dhidden = dhidden * cache.mask_scale
    gf, dx_f = _cell_backward(params.forward, cache.inputs, *cache.fw, dhidden[:, :H])
    gb, dx_b = _cell_backward(params.backward, cache.inputs[::-1], *cache.bw, dhidden[::-1, H:])
    for name, g in gf.items():
        grads[f"fw.{name}"] = g
    for name, g in gb.items():
        grads[f"bw.{name}"] = g
    grads["inputs"] = dx_f + dx_b[::-1]
    return grads
