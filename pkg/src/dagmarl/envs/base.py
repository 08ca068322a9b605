"""Environment contract shared by all simulations.

Per step every node consumes exactly one discrete action (index 0 is always
the idle/no-op choice) and the whole team receives one scalar reward.
snapshot()/restore() round-trip the full mutable state including the RNG, so
counterfactual rollouts replay bit-for-bit.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np


class InvalidAction(ValueError):
    pass


class VersionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class EnvSnapshot:
    signature: tuple
    payload: dict


def _equal(a, b):
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return (isinstance(a, np.ndarray) and isinstance(b, np.ndarray)
                and a.shape == b.shape and a.dtype == b.dtype
                and np.array_equal(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_equal(a[k], b[k]) for k in a)
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return (type(a) is type(b) and len(a) == len(b)
                and all(_equal(x, y) for x, y in zip(a, b)))
    return type(a) is type(b) and a == b


def snapshots_equal(a: EnvSnapshot, b: EnvSnapshot) -> bool:
    return a.signature == b.signature and _equal(a.payload, b.payload)


class DagEnv:
    """Base class wiring the snapshot plumbing and action validation.

    Subclasses set: topology, obs_dims, action_sizes, goal_period, max_steps;
    and implement reset(seed), observe(), and _advance(actions) -> (reward,
    done).  Mutable state must live in attributes listed in _STATE_ATTRS.
    """

    _STATE_ATTRS: tuple = ()

    topology = None
    obs_dims: list = []
    action_sizes: list = []
    goal_period: int = 1
    max_steps: int = 1

    def __init__(self):
        self.rng = np.random.default_rng(0)
        self.step_count = 0
        self._ready = False

    # -- to implement ------------------------------------------------------

    def reset(self, seed: int):
        raise NotImplementedError

    def observe(self) -> list:
        raise NotImplementedError

    def _advance(self, actions) -> tuple[float, bool]:
        raise NotImplementedError

    # -- shared machinery ----------------------------------------------------

    def _start(self, seed: int):
        self.rng = np.random.default_rng(int(seed))
        self.step_count = 0
        self._ready = True

    def step(self, actions):
        """Applies one action per node; returns (obs list, team reward, done)."""
        if not self._ready:
            raise RuntimeError("step() before reset()")
        actions = list(actions)
        if len(actions) != self.topology.node_count:
            raise InvalidAction(
                f"{len(actions)} actions for {self.topology.node_count} nodes")
        for i, a in enumerate(actions):
            if not (0 <= int(a) < self.action_sizes[i]):
                raise InvalidAction(
                    f"action {a} for node {i} with {self.action_sizes[i]} choices")
        reward, done = self._advance([int(a) for a in actions])
        self.step_count += 1
        if done:
            self._ready = False
        return self.observe(), float(reward), bool(done)

    def global_state(self) -> np.ndarray:
        return np.concatenate([np.asarray(o, dtype=np.float64)
                               for o in self.observe()])

    def signature(self) -> tuple:
        return (type(self).__name__, self.topology.node_count,
                tuple(self.obs_dims), tuple(self.action_sizes),
                self.goal_period, self.max_steps)

    def snapshot(self) -> EnvSnapshot:
        payload = {"step_count": self.step_count, "ready": self._ready,
                   "rng": copy.deepcopy(self.rng.bit_generator.state)}
        for name in self._STATE_ATTRS:
            payload[name] = copy.deepcopy(getattr(self, name))
        return EnvSnapshot(self.signature(), payload)

    def restore(self, snap: EnvSnapshot):
        if snap.signature != self.signature():
            raise VersionMismatch(
                f"snapshot {snap.signature} vs env {self.signature()}")
        self.step_count = snap.payload["step_count"]
        self._ready = snap.payload["ready"]
        self.rng.bit_generator.state = copy.deepcopy(snap.payload["rng"])
        for name in self._STATE_ATTRS:
            setattr(self, name, copy.deepcopy(snap.payload[name]))
