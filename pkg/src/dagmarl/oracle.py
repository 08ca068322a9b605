"""Exhaustive value computation on tabular DAG tasks.

Verifies the budget-soundness property of synthetic rewards: whenever the
per-sink contribution weights are non-negative and sum to at most 1 over the
sink's ancestor closure, the summed discounted synthetic values can never
exceed the summed discounted sink values.  Values are computed two
independent ways (distribution dynamic programming and raw trajectory
enumeration) so the implementations check each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .envs.micro import MicroDagEnv, sample_micro_env

DP_GUARD = 1_000_000  # joint (state, action) table cells
ENUM_GUARD = 1_000_000  # enumerated trajectories


class StateSpaceTooLarge(ValueError):
    pass


class InadmissibleContribution(ValueError):
    pass


class HypothesisViolated(ValueError):
    pass


# ---------------------------------------------------------------------------
# tabular policies and contribution tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TabularJointPolicy:
    """Per-node action tables, rows (own state) x columns (action)."""

    tables: tuple

    def __post_init__(self):
        for i, t in enumerate(self.tables):
            t = np.asarray(t, dtype=np.float64)
            if np.any(t < 0.0) or np.any(np.abs(t.sum(axis=1) - 1.0) > 1e-9):
                raise ValueError(f"node {i}: policy rows must sum to 1")

    @classmethod
    def uniform(cls, env: MicroDagEnv):
        return cls(tuple(np.full((s, a), 1.0 / a)
                         for s, a in zip(env.n_states, env.n_actions)))

    @classmethod
    def deterministic(cls, env: MicroDagEnv, choice):
        """choice[i][s] = the action node i takes in state s."""
        tables = []
        for i, (s, a) in enumerate(zip(env.n_states, env.n_actions)):
            t = np.zeros((s, a))
            for state in range(s):
                t[state, choice[i][state]] = 1.0
            tables.append(t)
        return cls(tuple(tables))


def sample_tabular_policy(rng: np.random.Generator,
                          env: MicroDagEnv) -> TabularJointPolicy:
    tables = []
    for s, a in zip(env.n_states, env.n_actions):
        raw = rng.random((s, a)) + 1e-3
        tables.append(raw / raw.sum(axis=1, keepdims=True))
    return TabularJointPolicy(tuple(tables))


@dataclass(frozen=True)
class ContributionTable:
    """Per-sink contribution weights f over the sink's ancestor closure.

    tables[k] has shape (len(members[k]), NS_k, NA_k) where NS_k / NA_k
    enumerate the joint states / actions of members[k] = sorted ancestors(k).
    """

    tables: dict
    members: dict


def validate_contribution(env: MicroDagEnv, contribution: ContributionTable):
    for k in env.topology.sinks:
        if k not in contribution.tables:
            raise InadmissibleContribution(f"sink {k} missing")
        f = contribution.tables[k]
        if np.any(f < 0.0):
            raise InadmissibleContribution(f"sink {k}: negative weights")
        if np.any(f.sum(axis=0) > 1.0 + 1e-9):
            raise InadmissibleContribution(
                f"sink {k}: weights sum above 1 somewhere")


def sample_admissible_contribution(rng: np.random.Generator, env: MicroDagEnv,
                                   row_sum=None) -> ContributionTable:
    """Random admissible weights; each (sink, joint tuple) column sums to
    u ~ U[0,1], or to the fixed `row_sum` when given."""
    tables, members = {}, {}
    for k in env.topology.sinks:
        m = sorted(env.topology.ancestors(k))
        ns = int(np.prod([env.n_states[j] for j in m]))
        na = int(np.prod([env.n_actions[j] for j in m]))
        raw = rng.random((len(m), ns, na)) + 1e-12
        u = np.full((ns, na), float(row_sum)) if row_sum is not None \
            else rng.random((ns, na))
        tables[k] = raw / raw.sum(axis=0) * u
        members[k] = tuple(m)
    return ContributionTable(tables, members)


# ---------------------------------------------------------------------------
# joint-space model
# ---------------------------------------------------------------------------


def _sub_index(digits, nodes, sizes):
    """Flat index of the `nodes` columns of a joint digit matrix."""
    idx = np.zeros(digits.shape[0], dtype=np.int64)
    for j in nodes:
        idx = idx * sizes[j] + digits[:, j]
    return idx


class _JointModel:
    def __init__(self, env: MicroDagEnv):
        self.env = env
        n = env.topology.node_count
        self.ns = int(np.prod(env.n_states))
        self.na = int(np.prod(env.n_actions))
        if self.ns * self.na > DP_GUARD or self.na * self.ns ** 2 > 20_000_000:
            raise StateSpaceTooLarge(
                f"{self.ns} joint states x {self.na} joint actions")

        self.s_digits = np.stack(np.unravel_index(np.arange(self.ns),
                                                  env.n_states), axis=1)
        self.a_digits = np.stack(np.unravel_index(np.arange(self.na),
                                                  env.n_actions), axis=1)

        self.mu0 = np.array([1.0])
        for i in range(n):
            self.mu0 = np.outer(self.mu0, env.p0[i]).ravel()

        # sink rewards over the full joint space
        self.sink_r = {}
        for k, table in env.sink_rewards.items():
            a_sub = _sub_index(self.a_digits, env.delta_order[k], env.n_actions)
            self.sink_r[k] = table[self.s_digits[:, k][:, None],
                                   a_sub[None, :]]
        self.team_r = sum(self.sink_r.values())
        self.r_max = float(sum(t.max() for t in env.sink_rewards.values()))

        # joint transition kernel per joint action
        self.trans = np.empty((self.na, self.ns, self.ns))
        for a in range(self.na):
            q = np.ones((self.ns, 1))
            for i in range(n):
                ja = _sub_index(self.a_digits[a:a + 1], env.delta_order[i],
                                env.n_actions)[0]
                rows = env.transitions[i][self.s_digits[:, i], ja]
                q = (q[:, :, None] * rows[:, None, :]).reshape(self.ns, -1)
            self.trans[a] = q

    def policy_matrix(self, policy: TabularJointPolicy):
        pol = np.ones((self.ns, self.na))
        for i, t in enumerate(policy.tables):
            pol *= np.asarray(t)[self.s_digits[:, i][:, None],
                                 self.a_digits[None, :, i]]
        return pol

    def synthetic_r(self, contribution: ContributionTable):
        env = self.env
        out = np.zeros((env.topology.node_count, self.ns, self.na))
        for k, f in contribution.tables.items():
            m = contribution.members[k]
            s_sub = _sub_index(self.s_digits, m, env.n_states)
            a_sub = _sub_index(self.a_digits, m, env.n_actions)
            for pos, i in enumerate(m):
                out[i] += f[pos][s_sub[:, None], a_sub[None, :]] * self.sink_r[k]
        return out


def _tail_bound(env, gamma, horizon, r_max):
    if horizon >= env.horizon:
        return 0.0
    if gamma >= 1.0:
        return (env.horizon - horizon) * r_max
    return gamma ** horizon * r_max / (1.0 - gamma)


def _dp(env, policy, gamma, horizon, contribution):
    model = _JointModel(env)
    pol = model.policy_matrix(policy)
    horizon = env.horizon if horizon is None else min(int(horizon), env.horizon)
    sr = model.synthetic_r(contribution) if contribution is not None else None

    sink_v = {k: 0.0 for k in model.sink_r}
    synth_v = np.zeros(env.topology.node_count)
    mu = model.mu0.copy()
    disc = 1.0
    for _ in range(horizon):
        w = mu[:, None] * pol
        for k, r in model.sink_r.items():
            sink_v[k] += disc * float(np.sum(w * r))
        if sr is not None:
            for i in range(env.topology.node_count):
                synth_v[i] += disc * float(np.sum(w * sr[i]))
        mu = np.einsum("sa,asn->n", w, model.trans)
        disc *= gamma
    tail = _tail_bound(env, gamma, horizon, model.r_max)
    return sink_v, synth_v, tail, horizon


def exact_values(env: MicroDagEnv, policy: TabularJointPolicy, gamma: float,
                 horizon: int | None = None):
    """Per-sink discounted values and the truncation tail bound."""
    sink_v, _, tail, _ = _dp(env, policy, gamma, horizon, None)
    return sink_v, tail


def synthetic_values(env: MicroDagEnv, policy: TabularJointPolicy,
                     contribution: ContributionTable, gamma: float,
                     horizon: int | None = None):
    """Per-node discounted synthetic values under the contribution weights."""
    validate_contribution(env, contribution)
    _, synth_v, tail, _ = _dp(env, policy, gamma, horizon, contribution)
    return synth_v, tail


# ---------------------------------------------------------------------------
# independent oracle: raw trajectory enumeration
# ---------------------------------------------------------------------------


def enumerate_values(env: MicroDagEnv, policy: TabularJointPolicy, gamma: float,
                     horizon: int, contribution: ContributionTable | None = None,
                     guard: int = ENUM_GUARD):
    """Sums over every trajectory explicitly.  Exponentially expensive; only
    for cross-checking the DP on tiny instances."""
    model = _JointModel(env)
    horizon = min(int(horizon), env.horizon)
    predicted = model.ns * (model.na * model.ns) ** max(horizon - 1, 0) * model.na
    if predicted > guard:
        raise StateSpaceTooLarge(f"about {predicted} trajectories")

    pol = model.policy_matrix(policy)
    sr = model.synthetic_r(contribution) if contribution is not None else None
    sink_v = {k: 0.0 for k in model.sink_r}
    synth_v = np.zeros(env.topology.node_count)

    def walk(state, t, prob):
        if t == horizon:
            return
        disc = gamma ** t
        for a in range(model.na):
            pa = prob * pol[state, a]
            if pa == 0.0:
                continue
            for k, r in model.sink_r.items():
                sink_v[k] += disc * pa * r[state, a]
            if sr is not None:
                for i in range(env.topology.node_count):
                    synth_v[i] += disc * pa * sr[i, state, a]
            for nxt in range(model.ns):
                pn = pa * model.trans[a, state, nxt]
                if pn > 0.0:
                    walk(nxt, t + 1, pn)

    for s0 in range(model.ns):
        if model.mu0[s0] > 0.0:
            walk(s0, 0, model.mu0[s0])
    tail = _tail_bound(env, gamma, horizon, model.r_max)
    return sink_v, synth_v, tail


# ---------------------------------------------------------------------------
# bound verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    total_synthetic: float
    total_sink: float
    tail_bound: float
    horizon: int
    ok: bool

    @property
    def margin(self):
        return self.total_sink - self.total_synthetic


def verify_bound(env: MicroDagEnv, policy: TabularJointPolicy,
                 contribution: ContributionTable, gamma: float,
                 horizon: int | None = None, slack: float = 1e-9) -> BoundReport:
    """Checks sum of synthetic values <= sum of sink values.

    Truncation can only remove non-negative mass from both sides, so the
    comparison allows twice the tail bound plus the float slack.
    """
    for k, table in env.sink_rewards.items():
        if np.any(table < 0.0):
            raise HypothesisViolated(f"sink {k} has negative rewards")
    validate_contribution(env, contribution)
    sink_v, synth_v, tail, used = _dp(env, policy, gamma, horizon, contribution)
    lhs = float(synth_v.sum())
    rhs = float(sum(sink_v.values()))
    return BoundReport(lhs, rhs, tail, used,
                       ok=lhs <= rhs + 2.0 * tail + slack)


@dataclass(frozen=True)
class CampaignReport:
    trials: int
    violations: int
    max_violation: float
    min_margin: float
    equality_trials: int
    max_equality_gap: float

    def to_dict(self):
        return {
            "trials": self.trials,
            "violations": self.violations,
            "max_violation": self.max_violation,
            "min_margin": self.min_margin,
            "equality_trials": self.equality_trials,
            "max_equality_gap": self.max_equality_gap,
        }


def _bound_horizon(gamma, tol, r_max):
    if r_max <= 0.0:
        return 1
    if gamma >= 1.0:
        raise ValueError("need gamma < 1 to bound the tail")
    return max(1, math.ceil(math.log(tol * (1.0 - gamma) / r_max)
                            / math.log(gamma)))


def run_bound_campaign(trials: int, seed: int, gamma: float = 0.9,
                       tol: float = 1e-6, max_nodes: int = 3) -> CampaignReport:
    """Random (env, policy, contribution) triples; checks the bound on each.

    Single-sink instances additionally get a saturated contribution (columns
    summing to exactly 1), where the bound must be an equality.
    """
    rng = np.random.default_rng(seed)
    violations = 0
    max_violation = 0.0
    min_margin = math.inf
    equality_trials = 0
    max_equality_gap = 0.0
    for _ in range(trials):
        env = sample_micro_env(rng, max_nodes=max_nodes, horizon=10 ** 9)
        horizon = _bound_horizon(gamma, tol, 1.0 * len(env.topology.sinks))
        env.horizon = horizon  # enumerate everything the bound needs
        env.max_steps = horizon
        policy = sample_tabular_policy(rng, env)
        contribution = sample_admissible_contribution(rng, env)
        report = verify_bound(env, policy, contribution, gamma)
        min_margin = min(min_margin, report.margin)
        if not report.ok:
            violations += 1
            max_violation = max(max_violation, -report.margin)
        if len(env.topology.sinks) == 1:
            saturated = sample_admissible_contribution(rng, env, row_sum=1.0)
            sat = verify_bound(env, policy, saturated, gamma)
            equality_trials += 1
            max_equality_gap = max(max_equality_gap, abs(sat.margin))
    return CampaignReport(trials, violations, max_violation, min_margin,
                          equality_trials, max_equality_gap)
