"""Stacked-LSTM window classifier: init, forward, and backprop through time.

Layout conventions, fixed everywhere (including checkpoints):

* A layer's gates are packed along one axis in the order [i, f, g, o]
  (input gate, forget gate, cell candidate, output gate).
* ``W`` maps the layer input (4H x D), ``U`` the previous hidden state
  (4H x H), ``b`` is the packed gate bias (4H,).
* Cell update: i,f,o = sigmoid of their slices, g = tanh of its slice,
  c_t = f*c_{t-1} + i*g, h_t = o*tanh(c_t).
* The classifier reads the last timestep's hidden state of the top layer
  through a dense layer with softmax.

Forward/backward run over a batch axis internally; the public single-window
operations are the batch-of-one case. All arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ContractViolationError
from .numerics import Rng, dropout_mask, relu, sigmoid, softmax, tanh_act


@dataclass(frozen=True)
class ModelConfig:
    """Architecture description; shapes every array in ModelParams.

    ``dropout_after`` lists the (0-based) LSTM layer indices whose output
    sequence is dropout-masked before feeding the next layer. Training mode
    only; inference never masks.
    """

    variant: str = "A"
    input_dim: int = 6
    hidden_sizes: tuple[int, ...] = (32, 32)
    num_classes: int = 10
    dropout_rate: float = 0.5
    input_relu: bool = True
    window_len: int = 250
    dropout_after: tuple[int, ...] = ()

    def __post_init__(self):
        # Coerce sequence fields so configs rebuilt from JSON compare equal.
        object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))
        object.__setattr__(self, "dropout_after", tuple(self.dropout_after))
        if not self.hidden_sizes:
            raise ContractViolationError("hidden_sizes must be nonempty")
        if any(h < 1 for h in self.hidden_sizes) or self.input_dim < 1 \
                or self.num_classes < 1 or self.window_len < 1:
            raise ContractViolationError("all dimensions must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ContractViolationError(
                f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if any(not 0 <= i < len(self.hidden_sizes) for i in self.dropout_after):
            raise ContractViolationError("dropout_after indexes a missing layer")

    @classmethod
    def variant_a(cls, *, input_dim: int = 6, window_len: int = 250,
                  dropout_rate: float = 0.5) -> "ModelConfig":
        """Two stacked 32-unit LSTMs behind an input ReLU; no dropout layer."""
        return cls(variant="A", input_dim=input_dim, hidden_sizes=(32, 32),
                   input_relu=True, window_len=window_len,
                   dropout_rate=dropout_rate, dropout_after=())

    @classmethod
    def variant_b(cls, *, input_dim: int = 6, window_len: int = 250,
                  dropout_rate: float = 0.5) -> "ModelConfig":
        """Three stacked 64-unit LSTMs with dropout after the second."""
        return cls(variant="B", input_dim=input_dim, hidden_sizes=(64, 64, 64),
                   input_relu=False, window_len=window_len,
                   dropout_rate=dropout_rate, dropout_after=(1,))

    def layer_input_sizes(self) -> tuple[int, ...]:
        return (self.input_dim,) + self.hidden_sizes[:-1]


@dataclass
class LSTMLayerParams:
    """One layer's weights: W (4H x D), U (4H x H), b (4H,)."""

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.U.shape[1]

    @property
    def input_size(self) -> int:
        return self.W.shape[1]


@dataclass
class ModelParams:
    """All learnable arrays, in checkpoint order: per layer W, U, b; then
    the dense head."""

    layers: list[LSTMLayerParams]
    dense_W: np.ndarray
    dense_b: np.ndarray

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for idx, layer in enumerate(self.layers):
            out.append((f"layer{idx}.W", layer.W))
            out.append((f"layer{idx}.U", layer.U))
            out.append((f"layer{idx}.b", layer.b))
        out.append(("dense_W", self.dense_W))
        out.append(("dense_b", self.dense_b))
        return out

    def zeros_like(self) -> "ModelParams":
        return ModelParams(
            layers=[LSTMLayerParams(np.zeros_like(l.W), np.zeros_like(l.U),
                                    np.zeros_like(l.b)) for l in self.layers],
            dense_W=np.zeros_like(self.dense_W),
            dense_b=np.zeros_like(self.dense_b),
        )

    def copy(self) -> "ModelParams":
        return ModelParams(
            layers=[LSTMLayerParams(l.W.copy(), l.U.copy(), l.b.copy())
                    for l in self.layers],
            dense_W=self.dense_W.copy(),
            dense_b=self.dense_b.copy(),
        )

    def to_flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for _, a in self.named_arrays()])

    def from_flat(self, flat: np.ndarray) -> "ModelParams":
        """Rebuild a params object with this one's shapes from a flat vector."""
        out = self.zeros_like()
        pos = 0
        for _, arr in out.named_arrays():
            n = arr.size
            arr[...] = flat[pos:pos + n].reshape(arr.shape)
            pos += n
        if pos != flat.size:
            raise ContractViolationError(
                f"flat vector has {flat.size} entries, expected {pos}")
        return out


def init_params(config: ModelConfig, rng: Rng) -> ModelParams:
    """Draw initial weights: uniform in +-1/sqrt(fan_in) per layer, biases
    zero except the forget gate's, which starts at 1.0 to keep early cell
    memory open. Draw order (layer by layer: W then U, then dense_W) is part
    of the reproducibility contract."""
    layers = []
    for d, h in zip(config.layer_input_sizes(), config.hidden_sizes):
        bound = 1.0 / np.sqrt(d)
        W = rng.uniform(-bound, bound, (4 * h, d))
        U = rng.uniform(-bound, bound, (4 * h, h))
        b = np.zeros(4 * h)
        b[h:2 * h] = 1.0  # forget gate slice
        layers.append(LSTMLayerParams(W=W, U=U, b=b))
    h_last = config.hidden_sizes[-1]
    bound = 1.0 / np.sqrt(h_last)
    dense_W = rng.uniform(-bound, bound, (config.num_classes, h_last))
    dense_b = np.zeros(config.num_classes)
    return ModelParams(layers=layers, dense_W=dense_W, dense_b=dense_b)


@dataclass
class LayerCache:
    """Per-layer activations kept for backprop: inputs, gate values, cell
    and hidden sequences, plus the dropout mask applied to this layer's
    output (None when not masked). Arrays are time-major: (T, B, dim).
    Inference-mode forwards keep only x and h (gates/c/tc are None)."""

    x: np.ndarray              # (T, B, D) layer input after relu/dropout
    gates: np.ndarray | None   # (T, B, 4H) gate values [i, f, g, o]
    c: np.ndarray | None       # (T, B, H)
    tc: np.ndarray | None      # (T, B, H) tanh(c)
    h: np.ndarray              # (T, B, H)
    out_mask: np.ndarray | None


@dataclass
class ForwardCache:
    """Everything a train-mode forward pass stored for exact backprop."""

    layer_caches: list[LayerCache]
    probs: np.ndarray    # (B, K)
    h_last: np.ndarray   # (B, H_last) final hidden state of top layer
    mode: str


def lstm_cell_forward(x_t: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray,
                      params: LSTMLayerParams):
    """One timestep of one layer. Accepts single vectors or (B, dim) batches.

    Returns (h_t, c_t, cache_slice) where cache_slice holds the gate values
    this step produced."""
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    h = params.hidden_size
    if x_t.shape[-1] != params.input_size or h_prev.shape[-1] != h \
            or c_prev.shape[-1] != h:
        raise ContractViolationError(
            f"cell dims disagree: x {x_t.shape}, h {h_prev.shape}, "
            f"c {c_prev.shape}, layer D={params.input_size} H={h}")
    a = x_t @ params.W.T + h_prev @ params.U.T + params.b
    i = sigmoid(a[..., 0:h])
    f = sigmoid(a[..., h:2 * h])
    g = tanh_act(a[..., 2 * h:3 * h])
    o = sigmoid(a[..., 3 * h:4 * h])
    c_t = f * c_prev + i * g
    h_t = o * np.tanh(c_t)
    gates = np.concatenate([i, f, g, o], axis=-1)
    return h_t, c_t, gates


def _layer_forward(x: np.ndarray, params: LSTMLayerParams,
                   store: bool = True) -> LayerCache:
    """Run one layer over a full time-major (T, B, D) input sequence.

    ``store=False`` skips the backprop intermediates (inference path)."""
    T, B, _ = x.shape
    H = params.hidden_size
    # Input-side projections for all timesteps at once; only the recurrent
    # product stays inside the loop.
    xp = (x.reshape(T * B, -1) @ params.W.T).reshape(T, B, 4 * H)
    xp += params.b
    gates = np.empty((T, B, 4 * H)) if store else None
    c_seq = np.empty((T, B, H)) if store else None
    tc_seq = np.empty((T, B, H)) if store else None
    h_seq = np.empty((T, B, H))
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    UT = np.ascontiguousarray(params.U.T)
    a = np.empty((B, 4 * H))
    gt = np.empty((B, 4 * H))
    ct = np.empty((B, H))
    tct = np.empty((B, H))
    for t in range(T):
        np.matmul(h, UT, out=a)
        a += xp[t]
        if store:
            gt, ct, tct = gates[t], c_seq[t], tc_seq[t]
        expit(a[:, 0:2 * H], out=gt[:, 0:2 * H])             # i, f
        np.tanh(a[:, 2 * H:3 * H], out=gt[:, 2 * H:3 * H])   # g
        expit(a[:, 3 * H:4 * H], out=gt[:, 3 * H:4 * H])     # o
        np.multiply(gt[:, H:2 * H], c, out=ct)  # aliasing-safe elementwise
        ct += gt[:, 0:H] * gt[:, 2 * H:3 * H]
        c = ct
        np.tanh(ct, out=tct)
        ht = h_seq[t]
        np.multiply(gt[:, 3 * H:4 * H], tct, out=ht)
        h = ht
    return LayerCache(x=x, gates=gates, c=c_seq, tc=tc_seq, h=h_seq,
                      out_mask=None)


def forward_batch(windows: np.ndarray, params: ModelParams, config: ModelConfig,
                  mode: str = "infer", rng: Rng | None = None
                  ) -> tuple[np.ndarray, ForwardCache]:
    """Forward a (B, T, C) batch of windows to (B, num_classes) probabilities.

    ``mode="train"`` draws dropout masks from ``rng`` at the configured
    positions and records them in the cache; ``"infer"`` is deterministic.
    """
    if mode not in ("train", "infer"):
        raise ContractViolationError(f"mode must be 'train' or 'infer', got {mode!r}")
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 3 or windows.shape[1] != config.window_len \
            or windows.shape[2] != config.input_dim:
        raise ContractViolationError(
            f"expected windows of shape (B, {config.window_len}, "
            f"{config.input_dim}), got {windows.shape}")
    use_dropout = mode == "train" and config.dropout_rate > 0.0 \
        and len(config.dropout_after) > 0
    if use_dropout and rng is None:
        raise ContractViolationError("train-mode dropout requires an Rng")

    # internal layout is time-major: (T, B, dim)
    x = np.ascontiguousarray(windows.transpose(1, 0, 2))
    if config.input_relu:
        x = relu(x)
    caches: list[LayerCache] = []
    for idx, layer in enumerate(params.layers):
        cache = _layer_forward(x, layer, store=(mode == "train"))
        x = cache.h
        if use_dropout and idx in config.dropout_after:
            mask = dropout_mask(rng, x.shape, config.dropout_rate)
            cache.out_mask = mask
            x = x * mask
        caches.append(cache)
    h_last = x[-1]
    logits = h_last @ params.dense_W.T + params.dense_b
    probs = softmax(logits)
    fc = ForwardCache(layer_caches=caches, probs=probs, h_last=h_last, mode=mode)
    return probs, fc


def model_forward(window: np.ndarray, params: ModelParams, config: ModelConfig,
                  mode: str = "infer", rng: Rng | None = None
                  ) -> tuple[np.ndarray, ForwardCache]:
    """Classify one (window_len, input_dim) window; returns (probabilities,
    cache). The cache from a train-mode call feeds model_backward."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise ContractViolationError(
            f"expected a 2-D window, got shape {window.shape}")
    probs, cache = forward_batch(window[None, :, :], params, config, mode, rng)
    return probs[0], cache


def _layer_backward(cache: LayerCache, params: LSTMLayerParams,
                    d_out: np.ndarray) -> tuple[np.ndarray, ...]:
    """BPTT through one layer. ``d_out`` is the loss gradient w.r.t. this
    layer's (masked) output sequence, time-major. Returns (dx, dW, dU, db)."""
    T, B, H = cache.h.shape
    gates, c_seq, tc_seq = cache.gates, cache.c, cache.tc
    if cache.out_mask is not None:
        d_out = d_out * cache.out_mask
    dA = np.empty((T, B, 4 * H))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    U = params.U
    for t in range(T - 1, -1, -1):
        gt = gates[t]
        i = gt[:, 0:H]
        f = gt[:, H:2 * H]
        g = gt[:, 2 * H:3 * H]
        o = gt[:, 3 * H:4 * H]
        tc = tc_seq[t]
        c_prev = c_seq[t - 1] if t > 0 else 0.0
        dh = d_out[t] + dh_next
        do = dh * tc
        dc = dc_next
        dc += dh * o * (1.0 - tc * tc)
        dAt = dA[t]
        np.multiply(dc * g, i * (1.0 - i), out=dAt[:, 0:H])
        np.multiply(dc * c_prev, f * (1.0 - f), out=dAt[:, H:2 * H])
        np.multiply(dc * i, 1.0 - g * g, out=dAt[:, 2 * H:3 * H])
        np.multiply(do, o * (1.0 - o), out=dAt[:, 3 * H:4 * H])
        dh_next = dAt @ U
        dc_next = dc * f
    dA2 = dA.reshape(T * B, 4 * H)
    dW = dA2.T @ cache.x.reshape(T * B, -1)
    h_prev = np.concatenate(
        [np.zeros((1, B, H)), cache.h[:T - 1]], axis=0).reshape(T * B, H)
    dU = dA2.T @ h_prev
    db = dA2.sum(axis=0)
    dx = (dA2 @ params.W).reshape(T, B, -1)
    return dx, dW, dU, db


def backward_batch(cache: ForwardCache, targets: np.ndarray, params: ModelParams,
                   config: ModelConfig, scale: float | np.ndarray = 1.0
                   ) -> ModelParams:
    """Gradients of the summed (scale-weighted) cross-entropy of a batch.

    ``scale`` weights each sample's loss; 1/B turns the sum into the batch
    mean. Returns a ModelParams-shaped container of gradients.
    """
    if cache.mode != "train":
        raise ContractViolationError(
            "backward needs a cache from a train-mode forward pass")
    if len(cache.layer_caches) != len(params.layers):
        raise ContractViolationError(
            f"cache has {len(cache.layer_caches)} layers, params have "
            f"{len(params.layers)}")
    for lc, lp in zip(cache.layer_caches, params.layers):
        if lc.h.shape[-1] != lp.hidden_size or lc.x.shape[-1] != lp.input_size:
            raise ContractViolationError("cache and params shapes disagree")
    targets = np.asarray(targets, dtype=np.int64)
    B, K = cache.probs.shape
    if targets.shape != (B,):
        raise ContractViolationError(
            f"targets shape {targets.shape} does not match batch {B}")
    if np.any(targets < 0) or np.any(targets >= K):
        raise ContractViolationError("target class out of range")

    # Softmax + cross-entropy head: dlogits = probs - onehot, per sample.
    dlogits = cache.probs.copy()
    dlogits[np.arange(B), targets] -= 1.0
    scale_arr = np.asarray(scale, dtype=np.float64)
    dlogits *= float(scale_arr) if scale_arr.ndim == 0 else scale_arr.reshape(-1, 1)

    grads = params.zeros_like()
    grads.dense_W[...] = dlogits.T @ cache.h_last
    grads.dense_b[...] = dlogits.sum(axis=0)

    top = cache.layer_caches[-1]
    d_seq = np.zeros_like(top.h)
    d_seq[-1] = dlogits @ params.dense_W
    for idx in range(len(params.layers) - 1, -1, -1):
        lc = cache.layer_caches[idx]
        dx, dW, dU, db = _layer_backward(lc, params.layers[idx], d_seq)
        g = grads.layers[idx]
        g.W[...] = dW
        g.U[...] = dU
        g.b[...] = db
        d_seq = dx
    return grads


def model_backward(cache: ForwardCache, target: int, params: ModelParams,
                   config: ModelConfig) -> ModelParams:
    """Exact gradients of cross_entropy(forward output, target) for one
    window, including the dropout masks the cache recorded."""
    B = cache.probs.shape[0]
    if B != 1:
        raise ContractViolationError(
            f"model_backward expects a single-window cache, got batch {B}")
    return backward_batch(cache, np.array([target]), params, config, scale=1.0)
