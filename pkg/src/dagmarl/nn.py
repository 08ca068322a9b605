"""Dense networks, Adam, and stochastic policy heads.

Everything is float64 numpy with hand-written reverse-mode gradients; there
is deliberately no autograd framework underneath.  Two head families cover
the policies used here: Categorical over logits and BoundedContinuous, a
per-coordinate Beta on (0,1) with both shape parameters >= 1.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln, digamma, polygamma


class DimensionMismatch(ValueError):
    pass


class NonFiniteInput(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


class NonFiniteGradient(ValueError):
    pass


class NonFiniteParams(ValueError):
    pass


class CheckpointMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# dense net
# ---------------------------------------------------------------------------


class DenseNet:
    """Fully connected ReLU net with a linear output layer.

    layer_dims = (in, h1, ..., out).  Weights init uniform over
    +-sqrt(6/(fan_in+fan_out)), biases zero.
    """

    def __init__(self, layer_dims, rng: np.random.Generator | None = None):
        layer_dims = tuple(int(d) for d in layer_dims)
        if len(layer_dims) < 2 or any(d < 1 for d in layer_dims):
            raise DimensionMismatch(f"bad layer dims {layer_dims}")
        self.layer_dims = layer_dims
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            if rng is None:
                w = np.zeros((fan_out, fan_in))
            else:
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    @classmethod
    def zeros(cls, layer_dims):
        return cls(layer_dims, rng=None)

    @property
    def in_dim(self):
        return self.layer_dims[0]

    @property
    def out_dim(self):
        return self.layer_dims[-1]

    def _prep(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise DimensionMismatch(
                f"input shape {x.shape} incompatible with in_dim {self.in_dim}")
        if not np.all(np.isfinite(x)):
            raise NonFiniteInput("non-finite network input")
        return x, single

    def forward(self, x):
        y, _ = self.forward_cached(x)
        return y

    def forward_cached(self, x):
        """Returns (output, cache) with activations kept for backward()."""
        x, single = self._prep(x)
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            h = z if l == last else np.maximum(z, 0.0)
            acts.append(h)
        out = acts[-1][0] if single else acts[-1]
        return out, (acts, single)

    def backward(self, cache, output_gradient):
        """Gradients of sum(output * output_gradient) w.r.t. all parameters.

        Returns [(dW, db), ...] per layer, summed over the batch dimension.
        """
        acts, single = cache
        g = np.asarray(output_gradient, dtype=np.float64)
        if single:
            g = g[None, :]
        if g.shape != acts[-1].shape:
            raise ShapeMismatch(
                f"output gradient {g.shape} vs output {acts[-1].shape}")
        grads = [None] * len(self.weights)
        for l in range(len(self.weights) - 1, -1, -1):
            grads[l] = (g.T @ acts[l], g.sum(axis=0))
            if l > 0:
                g = (g @ self.weights[l]) * (acts[l] > 0.0)
        return grads

    # -- parameter plumbing ------------------------------------------------

    def parameters(self):
        """Live references, ordered (W0, b0, W1, b1, ...)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy_parameters(self):
        return [p.copy() for p in self.parameters()]

    def load_parameters(self, params):
        mine = self.parameters()
        if len(params) != len(mine):
            raise ShapeMismatch("parameter list length mismatch")
        for dst, src in zip(mine, params):
            if dst.shape != src.shape:
                raise ShapeMismatch(f"{src.shape} into slot {dst.shape}")
            dst[...] = src

    @property
    def n_params(self):
        return sum(p.size for p in self.parameters())

    # -- serialization -------------------------------------------------------
    # flat binary record: magic, version, layer dims, then parameters
    # row-major as little-endian float64.

    MAGIC = b"DGNT"
    VERSION = 1

    def to_bytes(self) -> bytes:
        head = struct.pack("<4sHHI", self.MAGIC, self.VERSION, 0,
                           len(self.layer_dims))
        dims = struct.pack(f"<{len(self.layer_dims)}I", *self.layer_dims)
        body = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes()
                        for p in self.parameters())
        return head + dims + body

    @classmethod
    def from_bytes(cls, data: bytes, offset: int = 0):
        """Reads one record; returns (net, next_offset)."""
        try:
            magic, version, _, ndims = struct.unpack_from("<4sHHI", data, offset)
        except struct.error as e:
            raise CheckpointMismatch(f"truncated header: {e}") from None
        if magic != cls.MAGIC:
            raise CheckpointMismatch(f"bad magic {magic!r}")
        if version != cls.VERSION:
            raise CheckpointMismatch(f"unsupported version {version}")
        offset += struct.calcsize("<4sHHI")
        try:
            dims = struct.unpack_from(f"<{ndims}I", data, offset)
        except struct.error as e:
            raise CheckpointMismatch(f"truncated dims: {e}") from None
        offset += 4 * ndims
        net = cls.zeros(dims)
        for p in net.parameters():
            end = offset + 8 * p.size
            if end > len(data):
                raise CheckpointMismatch("truncated parameter block")
            p[...] = np.frombuffer(data[offset:end], dtype="<f8").reshape(p.shape)
            offset = end
        return net, offset


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_net(cls, net: DenseNet, learning_rate: float):
        state = cls(learning_rate=learning_rate)
        state.m = [np.zeros_like(p) for p in net.parameters()]
        state.v = [np.zeros_like(p) for p in net.parameters()]
        return state

    def snapshot(self):
        return (self.step, [m.copy() for m in self.m], [v.copy() for v in self.v])

    def restore(self, snap):
        self.step = snap[0]
        for dst, src in zip(self.m, snap[1]):
            dst[...] = src
        for dst, src in zip(self.v, snap[2]):
            dst[...] = src


def adam_step(state: AdamState, params, grads):
    """One in-place Adam update on `params` (live arrays)."""
    if len(params) != len(state.m) or len(grads) != len(state.m):
        raise ShapeMismatch("params/grads do not match optimizer state")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeMismatch(f"grad {g.shape} for param {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient("non-finite gradient")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------------------
# policy heads
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CategoricalHead:
    """Discrete distribution over n_actions logits."""

    n_actions: int

    @property
    def param_dim(self):
        return self.n_actions


@dataclass(frozen=True)
class BetaHead:
    """dim independent Beta coordinates on (0,1).

    The raw parameter vector is (alpha raws, beta raws); each shape parameter
    is 1 + softplus(raw), so both stay >= 1 and densities stay bounded.
    """

    dim: int

    @property
    def param_dim(self):
        return 2 * self.dim


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def beta_shapes(head: BetaHead, params):
    params = np.asarray(params, dtype=np.float64)
    if params.shape[-1] != head.param_dim:
        raise DimensionMismatch(
            f"{params.shape[-1]} raw params for BetaHead(dim={head.dim})")
    alpha = 1.0 + _softplus(params[..., :head.dim])
    beta = 1.0 + _softplus(params[..., head.dim:])
    return alpha, beta


_X_EDGE = 1e-12  # keep samples strictly inside (0,1)


def _check_params(params):
    if not np.all(np.isfinite(params)):
        raise NonFiniteParams("non-finite head parameters")


def sample_and_logprob(head, params, rng: np.random.Generator):
    """Draws one action; returns (action, log_prob, entropy)."""
    params = np.asarray(params, dtype=np.float64)
    _check_params(params)
    if isinstance(head, CategoricalHead):
        if params.shape != (head.n_actions,):
            raise DimensionMismatch(
                f"logits shape {params.shape} for {head.n_actions} actions")
        logp_all = params - _logsumexp(params)
        p = np.exp(logp_all)
        u = rng.random()
        action = int(min(np.searchsorted(np.cumsum(p), u, side="right"),
                         head.n_actions - 1))
        entropy = -float(p @ logp_all)
        return action, float(logp_all[action]), entropy
    if isinstance(head, BetaHead):
        alpha, beta = beta_shapes(head, params)
        x = np.clip(rng.beta(alpha, beta), _X_EDGE, 1.0 - _X_EDGE)
        logp = float(np.sum((alpha - 1.0) * np.log(x)
                            + (beta - 1.0) * np.log1p(-x)
                            - betaln(alpha, beta)))
        entropy = float(np.sum(_beta_entropy(alpha, beta)))
        return x, logp, entropy
    raise TypeError(f"unknown head {head!r}")


def frozen_action(head, params):
    """Deterministic action for evaluation: argmax logits / Beta mean."""
    params = np.asarray(params, dtype=np.float64)
    _check_params(params)
    if isinstance(head, CategoricalHead):
        return int(np.argmax(params))
    if isinstance(head, BetaHead):
        alpha, beta = beta_shapes(head, params)
        return alpha / (alpha + beta)
    raise TypeError(f"unknown head {head!r}")


def _logsumexp(z, axis=-1, keepdims=False):
    m = np.max(z, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(z - m), axis=axis, keepdims=True))
    return out if keepdims else np.squeeze(out, axis=axis)


def _beta_entropy(alpha, beta):
    s = alpha + beta
    return (betaln(alpha, beta)
            - (alpha - 1.0) * digamma(alpha)
            - (beta - 1.0) * digamma(beta)
            + (s - 2.0) * digamma(s))


def categorical_stats(logits, actions):
    """Batched log-prob/entropy and their logit gradients.

    logits (N,K), actions (N,) ints.  Returns (logp (N,), entropy (N,),
    dlogp (N,K), dentropy (N,K)).
    """
    logits = np.asarray(logits, dtype=np.float64)
    actions = np.asarray(actions)
    n, k = logits.shape
    logp_all = logits - _logsumexp(logits, keepdims=True)
    p = np.exp(logp_all)
    idx = np.arange(n)
    logp = logp_all[idx, actions]
    entropy = -np.sum(p * logp_all, axis=1)
    dlogp = -p.copy()
    dlogp[idx, actions] += 1.0
    dentropy = -p * (logp_all + entropy[:, None])
    return logp, entropy, dlogp, dentropy


def beta_stats(head: BetaHead, raw, actions):
    """Batched Beta log-prob/entropy and gradients w.r.t. the raw params.

    raw (N, 2*dim), actions (N, dim) in (0,1).
    """
    raw = np.asarray(raw, dtype=np.float64)
    x = np.clip(np.asarray(actions, dtype=np.float64), _X_EDGE, 1.0 - _X_EDGE)
    alpha, beta = beta_shapes(head, raw)
    s = alpha + beta
    log_x = np.log(x)
    log_1mx = np.log1p(-x)

    logp = np.sum((alpha - 1.0) * log_x + (beta - 1.0) * log_1mx
                  - betaln(alpha, beta), axis=1)
    entropy = np.sum(_beta_entropy(alpha, beta), axis=1)

    psi_s = digamma(s)
    dlogp_da = log_x - digamma(alpha) + psi_s
    dlogp_db = log_1mx - digamma(beta) + psi_s
    tri_s = polygamma(1, s)
    dent_da = -(alpha - 1.0) * polygamma(1, alpha) + (s - 2.0) * tri_s
    dent_db = -(beta - 1.0) * polygamma(1, beta) + (s - 2.0) * tri_s

    # chain through alpha = 1 + softplus(raw_a), beta = 1 + softplus(raw_b)
    sig_a = _sigmoid(raw[:, :head.dim])
    sig_b = _sigmoid(raw[:, head.dim:])
    dlogp = np.concatenate([dlogp_da * sig_a, dlogp_db * sig_b], axis=1)
    dentropy = np.concatenate([dent_da * sig_a, dent_db * sig_b], axis=1)
    return logp, entropy, dlogp, dentropy
