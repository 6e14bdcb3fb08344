"""Undirected switching communication graphs and the mode schedule.

Agent indices are 1-based at every public surface.
"""

import bisect
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


def _normalize_edges(n_agents, edges):
    out = set()
    for e in edges:
        i, j = (int(v) for v in e)
        if i == j:
            raise DomainError(f"self-loop on agent {i}")
        for v in (i, j):
            if not 1 <= v <= n_agents:
                raise DomainError(f"agent index {v} out of range 1..{n_agents}")
        pair = (min(i, j), max(i, j))
        if pair in out:
            raise DomainError(f"duplicate edge {pair[0]}-{pair[1]}")
        out.add(pair)
    return frozenset(out)


@dataclass(frozen=True)
class Topology:
    n_agents: int
    edges: frozenset
    mode_id: int = 1

    def __post_init__(self):
        if self.n_agents < 1:
            raise DomainError("n_agents must be >= 1")
        object.__setattr__(self, "edges", _normalize_edges(self.n_agents, self.edges))

    def sorted_edges(self):
        return sorted(self.edges)


def adjacency(topo):
    n = topo.n_agents
    A = np.zeros((n, n))
    for i, j in topo.edges:
        A[i - 1, j - 1] = A[j - 1, i - 1] = 1.0
    return A


def laplacian(topo):
    A = adjacency(topo)
    return np.diag(A.sum(axis=1)) - A


def neighbors(topo, i):
    if not 1 <= i <= topo.n_agents:
        raise DomainError(f"agent index {i} out of range 1..{topo.n_agents}")
    return {b if a == i else a for a, b in topo.edges if i in (a, b)}


def is_connected(topo):
    n = topo.n_agents
    adj = {v: set() for v in range(1, n + 1)}
    for i, j in topo.edges:
        adj[i].add(j)
        adj[j].add(i)
    seen = {1}
    queue = deque([1])
    while queue:
        v = queue.popleft()
        for w in adj[v] - seen:
            seen.add(w)
            queue.append(w)
    return len(seen) == n


@dataclass(frozen=True)
class SwitchingPlan:
    """Right-continuous mode schedule; mode 1 holds before the first switch."""

    schedule: tuple = field(default_factory=tuple)

    def __post_init__(self):
        sched = tuple((float(t), int(m)) for t, m in self.schedule)
        times = [t for t, _ in sched]
        if any(t < 0 for t in times):
            raise DomainError("switch times must be non-negative")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise DomainError("switch times must be strictly increasing")
        object.__setattr__(self, "schedule", sched)

    def mode_ids(self):
        return {m for _, m in self.schedule} | {1}


def active_mode(plan, t):
    if t < 0:
        raise DomainError(f"negative time {t}")
    times = [s for s, _ in plan.schedule]
    idx = bisect.bisect_right(times, t)
    return 1 if idx == 0 else plan.schedule[idx - 1][1]


# Mode 1 gives N^1 = {3,4,5} and N^3 = {1,2,5}.
# Modes 2-4 are hand-picked connected variants of it.
#   mode 2: edge 3-5 replaced by 2-5
#   mode 3: agent 4 re-homed from agent 1 to agent 3
#   mode 4: edge 3-5 dropped
DEFAULT_MODE_EDGES = {
    1: ((1, 3), (1, 4), (1, 5), (2, 3), (3, 5)),
    2: ((1, 3), (1, 4), (1, 5), (2, 3), (2, 5)),
    3: ((1, 3), (1, 5), (2, 3), (3, 4), (3, 5)),
    4: ((1, 3), (1, 4), (1, 5), (2, 3)),
}


def default_mode_table(n_agents=5):
    if n_agents != 5:
        raise DomainError("the default mode table is defined for 5 agents")
    return {m: Topology(5, frozenset(e), m) for m, e in DEFAULT_MODE_EDGES.items()}
