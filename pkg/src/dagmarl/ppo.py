"""Clipped-surrogate PPO on top of the hand-rolled dense nets.

One learner owns a policy net and a value net (separate trunks, separate
Adam states).  Action spaces are described by small codecs so the same
update code serves discrete agents, joint multi-node discrete agents, and
bounded-continuous agents (goal vectors, budget fractions).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .nn import BetaHead, CategoricalHead, DenseNet


class EmptyBatch(ValueError):
    pass


class NonFiniteLoss(RuntimeError):
    pass


@dataclass(frozen=True)
class PpoConfig:
    clip_epsilon: float = 0.2
    learning_rate: float = 1e-4
    gamma: float = 0.99
    gae_lambda: float = 0.95
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    batch_size: int = 256
    epochs_per_update: int = 4
    hidden: tuple = (256, 256)

    def __post_init__(self):
        if not (0.0 < self.clip_epsilon < 1.0):
            raise ValueError(f"clip_epsilon {self.clip_epsilon} outside (0,1)")
        if not (0.0 <= self.gamma <= 1.0) or not (0.0 <= self.gae_lambda <= 1.0):
            raise ValueError("gamma and gae_lambda must lie in [0,1]")
        if self.batch_size < 1 or self.epochs_per_update < 1:
            raise ValueError("batch_size and epochs_per_update must be >= 1")
        if len(self.hidden) < 1 or any(h < 1 for h in self.hidden):
            raise ValueError("hidden needs at least one positive layer width")


@dataclass
class Transition:
    state: np.ndarray
    action: object
    log_prob: float
    reward: float
    value: float
    terminal: bool


@dataclass
class TrajectoryBatch:
    """Episode-ordered transitions plus the bootstrap value after the last."""

    transitions: list = field(default_factory=list)
    bootstrap_value: float = 0.0

    def __len__(self):
        return len(self.transitions)

    def append(self, tr: Transition):
        self.transitions.append(tr)

    def arrays(self):
        states = np.stack([t.state for t in self.transitions])
        rewards = np.array([t.reward for t in self.transitions])
        values = np.array([t.value for t in self.transitions])
        terminals = np.array([t.terminal for t in self.transitions], dtype=bool)
        log_probs = np.array([t.log_prob for t in self.transitions])
        return states, rewards, values, terminals, log_probs


def compute_gae(batch: TrajectoryBatch, gamma: float, lam: float):
    """Generalized advantage estimates and value targets.

    Backward recursion; a terminal flag cuts both the bootstrap and the
    advantage tail, so a batch may hold several episode segments.
    Returns (advantages, returns) with returns = advantages + values.
    """
    if len(batch) == 0:
        raise EmptyBatch("no transitions")
    _, rewards, values, terminals, _ = batch.arrays()
    n = len(rewards)
    adv = np.zeros(n)
    next_value = batch.bootstrap_value
    next_adv = 0.0
    for t in range(n - 1, -1, -1):
        if terminals[t]:
            next_value = 0.0
            next_adv = 0.0
        delta = rewards[t] + gamma * next_value - values[t]
        next_adv = delta + gamma * lam * next_adv
        adv[t] = next_adv
        next_value = values[t]
    return adv, adv + values


# ---------------------------------------------------------------------------
# action codecs
# ---------------------------------------------------------------------------


class DiscreteCodec:
    """Single categorical action."""

    def __init__(self, n_actions: int):
        self.head = CategoricalHead(n_actions)
        self.param_dim = self.head.param_dim

    def sample(self, params, rng):
        return nn.sample_and_logprob(self.head, params, rng)

    def frozen(self, params):
        return nn.frozen_action(self.head, params)

    def stats(self, params, actions):
        return nn.categorical_stats(params, np.asarray(actions, dtype=int))

    def stack_actions(self, actions):
        return np.asarray(actions, dtype=int)


class ContinuousCodec:
    """Vector of independent Beta coordinates on (0,1)."""

    def __init__(self, dim: int):
        self.head = BetaHead(dim)
        self.param_dim = self.head.param_dim

    def sample(self, params, rng):
        return nn.sample_and_logprob(self.head, params, rng)

    def frozen(self, params):
        return nn.frozen_action(self.head, params)

    def stats(self, params, actions):
        return nn.beta_stats(self.head, params, actions)

    def stack_actions(self, actions):
        return np.stack([np.asarray(a, dtype=np.float64) for a in actions])


class JointDiscreteCodec:
    """One categorical segment per node under a shared trunk.

    The action is a tuple of ints; log-probs and entropies add across
    segments, gradients concatenate.
    """

    def __init__(self, sizes):
        self.sizes = tuple(int(s) for s in sizes)
        self.heads = [CategoricalHead(s) for s in self.sizes]
        self.param_dim = sum(self.sizes)
        self._offsets = np.cumsum((0,) + self.sizes)

    def _segment(self, params, k):
        return params[..., self._offsets[k]:self._offsets[k + 1]]

    def sample(self, params, rng):
        actions, logp, ent = [], 0.0, 0.0
        for k, head in enumerate(self.heads):
            a, lp, en = nn.sample_and_logprob(head, self._segment(params, k), rng)
            actions.append(a)
            logp += lp
            ent += en
        return tuple(actions), logp, ent

    def frozen(self, params):
        return tuple(nn.frozen_action(head, self._segment(params, k))
                     for k, head in enumerate(self.heads))

    def stats(self, params, actions):
        actions = np.asarray(actions, dtype=int)
        n = params.shape[0]
        logp = np.zeros(n)
        ent = np.zeros(n)
        dlogp = np.zeros_like(params)
        dent = np.zeros_like(params)
        for k in range(len(self.heads)):
            lo, hi = self._offsets[k], self._offsets[k + 1]
            lp, en, dl, de = nn.categorical_stats(params[:, lo:hi], actions[:, k])
            logp += lp
            ent += en
            dlogp[:, lo:hi] = dl
            dent[:, lo:hi] = de
        return logp, ent, dlogp, dent

    def stack_actions(self, actions):
        return np.asarray([list(a) for a in actions], dtype=int)


# ---------------------------------------------------------------------------
# learner
# ---------------------------------------------------------------------------


class PpoLearner:
    """Policy + value pair with its own RNG stream and Adam states."""

    def __init__(self, obs_dim: int, codec, config: PpoConfig,
                 rng: np.random.Generator):
        self.obs_dim = int(obs_dim)
        self.codec = codec
        self.config = config
        self.rng = rng
        dims = (self.obs_dim, *config.hidden)
        self.policy = DenseNet(dims + (codec.param_dim,), rng)
        self.value = DenseNet(dims + (1,), rng)
        self.opt_policy = nn.AdamState.for_net(self.policy, config.learning_rate)
        self.opt_value = nn.AdamState.for_net(self.value, config.learning_rate)

    # -- acting ------------------------------------------------------------

    def act(self, state):
        """Samples an action; returns (action, log_prob, value)."""
        params = self.policy.forward(state)
        action, logp, _ = self.codec.sample(params, self.rng)
        value = float(self.value.forward(state)[0])
        return action, logp, value

    def frozen_act(self, state):
        return self.codec.frozen(self.policy.forward(state))

    # -- learning ------------------------------------------------------------

    def update(self, batch: TrajectoryBatch) -> dict:
        """One PPO update over the batch; returns loss/entropy diagnostics.

        On any non-finite loss or gradient the pre-update parameters and
        optimizer state are restored before NonFiniteLoss is raised.
        """
        if len(batch) == 0:
            raise EmptyBatch("no transitions")
        cfg = self.config
        states, _, _, _, old_logp = batch.arrays()
        actions = self.codec.stack_actions([t.action for t in batch.transitions])
        adv, returns = compute_gae(batch, cfg.gamma, cfg.gae_lambda)
        if not (np.all(np.isfinite(adv)) and np.all(np.isfinite(returns))):
            raise NonFiniteLoss("non-finite advantages or returns")
        std = adv.std()
        if std >= 1e-8:
            adv = (adv - adv.mean()) / std

        saved = (self.policy.copy_parameters(), self.value.copy_parameters(),
                 self.opt_policy.snapshot(), self.opt_value.snapshot())
        n = len(batch)
        diags = {"policy_loss": [], "value_loss": [], "entropy": [],
                 "clip_fraction": []}
        try:
            for _ in range(cfg.epochs_per_update):
                perm = self.rng.permutation(n)
                for lo in range(0, n, cfg.batch_size):
                    idx = perm[lo:lo + cfg.batch_size]
                    self._minibatch_step(states[idx], actions[idx],
                                         old_logp[idx], adv[idx],
                                         returns[idx], diags)
        except (NonFiniteLoss, nn.NonFiniteGradient) as err:
            self.policy.load_parameters(saved[0])
            self.value.load_parameters(saved[1])
            self.opt_policy.restore(saved[2])
            self.opt_value.restore(saved[3])
            raise NonFiniteLoss(str(err)) from None
        out = {k: float(np.mean(v)) for k, v in diags.items()}
        out["transitions"] = n
        return out

    def _minibatch_step(self, states, actions, old_logp, adv, returns, diags):
        cfg = self.config
        m = len(states)

        params, cache = self.policy.forward_cached(states)
        logp, entropy, dlogp, dentropy = self.codec.stats(params, actions)
        ratio = np.exp(logp - old_logp)
        unclipped = ratio * adv
        clipped = np.clip(ratio, 1.0 - cfg.clip_epsilon,
                          1.0 + cfg.clip_epsilon) * adv
        surrogate = np.minimum(unclipped, clipped)
        policy_loss = -np.mean(surrogate) - cfg.entropy_coef * np.mean(entropy)

        # gradient flows through the ratio only where the unclipped branch
        # is the active minimum
        dsurr_dlogp = np.where(unclipped <= clipped, ratio * adv, 0.0)
        gout = -(dsurr_dlogp[:, None] * dlogp
                 + cfg.entropy_coef * dentropy) / m

        values, vcache = self.value.forward_cached(states)
        verr = values[:, 0] - returns
        value_loss = cfg.value_coef * np.mean(verr ** 2)
        gval = (2.0 * cfg.value_coef * verr / m)[:, None]

        if not (np.isfinite(policy_loss) and np.isfinite(value_loss)):
            raise NonFiniteLoss(
                f"policy_loss={policy_loss}, value_loss={value_loss}")

        adam = nn.adam_step
        adam(self.opt_policy, self.policy.parameters(),
             [g for pair in self.policy.backward(cache, gout) for g in pair])
        adam(self.opt_value, self.value.parameters(),
             [g for pair in self.value.backward(vcache, gval) for g in pair])

        diags["policy_loss"].append(policy_loss)
        diags["value_loss"].append(value_loss)
        diags["entropy"].append(np.mean(entropy))
        diags["clip_fraction"].append(
            np.mean(np.abs(ratio - 1.0) > cfg.clip_epsilon))

    # -- checkpointing -------------------------------------------------------

    def to_bytes(self) -> bytes:
        return self.policy.to_bytes() + self.value.to_bytes()

    def load_bytes(self, data: bytes):
        policy, offset = DenseNet.from_bytes(data)
        value, end = DenseNet.from_bytes(data, offset)
        if end != len(data):
            raise nn.CheckpointMismatch(f"{len(data) - end} trailing bytes")
        if policy.layer_dims != self.policy.layer_dims:
            raise nn.CheckpointMismatch(
                f"policy dims {policy.layer_dims} != {self.policy.layer_dims}")
        if value.layer_dims != self.value.layer_dims:
            raise nn.CheckpointMismatch(
                f"value dims {value.layer_dims} != {self.value.layer_dims}")
        self.policy.load_parameters(policy.parameters())
        self.value.load_parameters(value.parameters())

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    def load(self, path):
        with open(path, "rb") as fh:
            self.load_bytes(fh.read())
