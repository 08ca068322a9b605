"""Task-graph topology and reachability queries.

Nodes are dense integer ids 0..n-1.  Arcs point in the direction of task
flow (upstream node -> downstream node).  Reward shares travel the other
way, so the reward-flow neighbors of a node are its task-predecessors
(recipients) and task-successors (senders).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np


class EmptyGraph(ValueError):
    pass


class InvalidNode(ValueError):
    pass


class CycleDetected(ValueError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cycle: " + " -> ".join(str(v) for v in self.cycle))


@dataclass(frozen=True)
class NodeClosures:
    """Ancestor / descendant / influence closures of one node, self included."""

    delta: frozenset  # ancestors
    upsilon: frozenset  # descendants
    omega: frozenset  # union of the two


def _check_arcs(node_count, arcs):
    for u, v in arcs:
        if not (0 <= u < node_count) or not (0 <= v < node_count):
            raise InvalidNode(f"arc ({u}, {v}) outside 0..{node_count - 1}")
        if u == v:
            raise CycleDetected([u, u])


def topological_order(node_count: int, arcs) -> list[int]:
    """Kahn's algorithm with an ascending-index tie-break.

    Raises EmptyGraph for node_count < 1 and CycleDetected (carrying one
    offending cycle) when the arcs admit no topological order.
    """
    if node_count < 1:
        raise EmptyGraph(f"node_count must be >= 1, got {node_count}")
    arcs = sorted(set(tuple(a) for a in arcs))
    _check_arcs(node_count, arcs)

    succ = {i: [] for i in range(node_count)}
    indeg = [0] * node_count
    for u, v in arcs:
        succ[u].append(v)
        indeg[v] += 1

    ready = [i for i in range(node_count) if indeg[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        i = heapq.heappop(ready)
        order.append(i)
        for j in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                heapq.heappush(ready, j)

    if len(order) < node_count:
        remaining = set(range(node_count)) - set(order)
        raise CycleDetected(_find_cycle(succ, remaining))
    return order


def _find_cycle(succ, remaining):
    # every remaining node lies on or leads into a cycle; walk until a repeat
    start = min(remaining)
    path, seen = [], {}
    node = start
    while node not in seen:
        seen[node] = len(path)
        path.append(node)
        node = min(j for j in succ[node] if j in remaining)
    return path[seen[node]:] + [node]


class DagTopology:
    """Validated DAG with cached closures.

    Immutable after construction; all query methods are side-effect free and
    safe for concurrent reads.
    """

    def __init__(self, node_count: int, arcs, names=None):
        self._order = topological_order(node_count, arcs)
        self.node_count = node_count
        self.arcs = tuple(sorted(set(tuple(a) for a in arcs)))
        if names is not None:
            names = tuple(names)
            if len(names) != node_count:
                raise InvalidNode(f"{len(names)} names for {node_count} nodes")
        self.names = names

        self._succ = {i: [] for i in range(node_count)}
        self._pred = {i: [] for i in range(node_count)}
        for u, v in self.arcs:
            self._succ[u].append(v)
            self._pred[v].append(u)
        for i in range(node_count):
            self._succ[i].sort()
            self._pred[i].sort()

        self._delta = [self._reach(i, self._pred) for i in range(node_count)]
        self._upsilon = [self._reach(i, self._succ) for i in range(node_count)]
        self.arc_index = {a: n for n, a in enumerate(self.arcs)}

    def _reach(self, start, adjacency):
        seen = {start}
        frontier = [start]
        while frontier:
            nxt = []
            for i in frontier:
                for j in adjacency[i]:
                    if j not in seen:
                        seen.add(j)
                        nxt.append(j)
            frontier = nxt
        return frozenset(seen)

    # -- queries ---------------------------------------------------------

    @property
    def topological_order(self) -> list[int]:
        return list(self._order)

    def _check_node(self, i):
        if not (0 <= i < self.node_count):
            raise InvalidNode(f"node {i} outside 0..{self.node_count - 1}")

    def predecessors(self, i) -> list[int]:
        self._check_node(i)
        return list(self._pred[i])

    def successors(self, i) -> list[int]:
        self._check_node(i)
        return list(self._succ[i])

    def ancestors(self, i) -> frozenset:
        """All nodes with a directed path to i, including i itself."""
        self._check_node(i)
        return self._delta[i]

    def descendants(self, i) -> frozenset:
        """All nodes reachable from i, including i itself."""
        self._check_node(i)
        return self._upsilon[i]

    def influence(self, i) -> frozenset:
        """Ancestors union descendants (self included)."""
        self._check_node(i)
        return self._delta[i] | self._upsilon[i]

    def closures(self, i) -> NodeClosures:
        self._check_node(i)
        return NodeClosures(self._delta[i], self._upsilon[i], self.influence(i))

    @property
    def sinks(self) -> list[int]:
        return [i for i in range(self.node_count) if not self._succ[i]]

    @property
    def sources(self) -> list[int]:
        return [i for i in range(self.node_count) if not self._pred[i]]

    def is_sink(self, i) -> bool:
        self._check_node(i)
        return not self._succ[i]

    def reward_flow_neighbors(self, i) -> tuple[frozenset, frozenset]:
        """(delta_i, ch_i): recipients of i's shares and senders into i.

        Reward flows against the task arcs, so delta_i are i's direct
        task-predecessors and ch_i its direct task-successors.
        """
        self._check_node(i)
        return frozenset(self._pred[i]), frozenset(self._succ[i])

    def __repr__(self):
        return f"DagTopology(node_count={self.node_count}, arcs={self.arcs})"


def random_topology(rng: np.random.Generator, node_count: int,
                    arc_prob: float = 0.4) -> DagTopology:
    """Random DAG: forward arcs under a random node permutation."""
    perm = rng.permutation(node_count)
    arcs = []
    for a in range(node_count):
        for b in range(a + 1, node_count):
            if rng.random() < arc_prob:
                arcs.append((int(perm[a]), int(perm[b])))
    return DagTopology(node_count, arcs)
