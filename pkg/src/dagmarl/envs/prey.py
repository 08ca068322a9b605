"""Grid pursuit: a chain of preys evades simple chasing predators.

Four prey agents form the task DAG root -> mid -> {sink, sink}; each child
must stay inside the Chebyshev-5 box around its parent, so the root steers
the formation.  Predators only hunt the two sink preys.  Parents move first
(topological order) and children are clamped against the parent's new
position.  Predators then take the move that most reduces their Manhattan
distance to the nearest living sink (ties broken at random); each predator's
very first move instead uses a direction drawn at reset.  A sink prey that
shares a cell with a predator at the end of the step dies.

The team earns +1 per living sink prey per step; the episode ends when both
sinks are dead or after max_steps.
"""

from __future__ import annotations

import numpy as np

from ..dag import DagTopology
from .base import DagEnv

DIRS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
PARENT = {1: 0, 2: 1, 3: 1}
LEASH = 5  # Chebyshev radius around the parent


class PreyEnv(DagEnv):

    _STATE_ATTRS = ("prey_pos", "alive", "predator_pos", "first_dir")

    def __init__(self, grid_size: int = 20, predators: int = 2,
                 max_steps: int = 200, goal_period: int = 10):
        super().__init__()
        if grid_size < 4 or predators < 1:
            raise ValueError("need grid_size >= 4 and predators >= 1")
        self.topology = DagTopology(4, [(0, 1), (1, 2), (1, 3)],
                                    names=("root", "mid", "sink-1", "sink-2"))
        self.grid_size = int(grid_size)
        self.n_predators = int(predators)
        self.max_steps = int(max_steps)
        self.goal_period = int(goal_period)
        self.action_sizes = [9, 9, 9, 9]  # stay + 8 directions
        self.obs_dims = [8, 8, 8, 8]
        self.sinks = (2, 3)

    # -- lifecycle -----------------------------------------------------------

    def reset(self, seed: int):
        self._start(seed)
        g = self.grid_size
        c = g // 2
        self.prey_pos = np.array([[c, c], [c, c - 1],
                                  [c - 2, c - 2], [c + 2, c - 2]])
        self.alive = np.array([True] * 4)
        corners = [(0, 0), (g - 1, g - 1), (0, g - 1), (g - 1, 0)]
        self.predator_pos = np.array(
            [corners[p % 4] for p in range(self.n_predators)])
        self.first_dir = [int(self.rng.integers(len(DIRS)))
                          for _ in range(self.n_predators)]
        return self.observe()

    # -- dynamics ------------------------------------------------------------

    def _clamp_grid(self, pos):
        return np.clip(pos, 0, self.grid_size - 1)

    def _advance(self, actions):
        for i in self.topology.topological_order:
            if not self.alive[i]:
                continue
            a = actions[i]
            pos = self.prey_pos[i].copy()
            if a > 0:
                pos += DIRS[a - 1]
            pos = self._clamp_grid(pos)
            if i in PARENT:
                anchor = self.prey_pos[PARENT[i]]
                pos = np.clip(pos, anchor - LEASH, anchor + LEASH)
                pos = self._clamp_grid(pos)
            self.prey_pos[i] = pos

        for p in range(self.n_predators):
            self.predator_pos[p] = self._predator_move(p)

        for k in self.sinks:
            if self.alive[k] and any(
                    np.array_equal(self.prey_pos[k], self.predator_pos[p])
                    for p in range(self.n_predators)):
                self.alive[k] = False

        living = int(sum(self.alive[k] for k in self.sinks))
        done = living == 0 or self.step_count + 1 >= self.max_steps
        return float(living), done

    def _predator_move(self, p):
        pos = self.predator_pos[p]
        if self.first_dir[p] is not None:
            step = DIRS[self.first_dir[p]]
            self.first_dir[p] = None
            return self._clamp_grid(pos + step)
        target = self._nearest_living_sink(pos)
        options = [self._clamp_grid(pos + d) for d in DIRS]
        dists = [abs(q[0] - target[0]) + abs(q[1] - target[1]) for q in options]
        best = min(dists)
        ties = [q for q, d in zip(options, dists) if d == best]
        return ties[int(self.rng.integers(len(ties)))]

    def _nearest_living_sink(self, pos):
        best, best_d = None, None
        for k in self.sinks:
            if not self.alive[k]:
                continue
            d = abs(self.prey_pos[k][0] - pos[0]) + abs(self.prey_pos[k][1] - pos[1])
            if best_d is None or d < best_d:
                best, best_d = self.prey_pos[k], d
        return best

    # -- observations ----------------------------------------------------------

    def observe(self):
        g = float(self.grid_size)
        frac = (self.step_count % self.goal_period) / self.goal_period
        out = []
        for i in range(4):
            pos = self.prey_pos[i]
            if i in PARENT:
                rel_parent = (self.prey_pos[PARENT[i]] - pos) / g
            else:
                rel_parent = np.zeros(2)
            dists = [abs(q[0] - pos[0]) + abs(q[1] - pos[1])
                     for q in self.predator_pos]
            nearest = self.predator_pos[int(np.argmin(dists))]
            out.append(np.array([pos[0] / g, pos[1] / g,
                                 rel_parent[0], rel_parent[1],
                                 (nearest[0] - pos[0]) / g,
                                 (nearest[1] - pos[1]) / g,
                                 float(self.alive[i]), frac]))
        return out
