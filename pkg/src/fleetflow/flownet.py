"""Integer min-cost max-flow by successive minimum-cost augmenting paths.

Every solve works on a residual graph in which each input edge ``(u, v)``
is paired with a reverse arc ``(v, u)`` of cost ``-c``; the shortest
augmenting path is found with a FIFO label-correcting search (a
Bellman-Ford variant), which tolerates the negative reverse costs without
potentials bookkeeping.  Capacities are integers, so every flow value the
solver produces is an integer.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import IO, Optional, Sequence

UNBOUNDED = None


class NegativeCycleError(RuntimeError):
    """The residual graph contains a reachable negative-cost cycle."""


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    capacity: Optional[int]
    cost: int


class FlowNetwork:
    """Directed graph with integer capacities and costs.

    Vertices are ``0 .. num_vertices - 1``.  A capacity of ``None``
    (``UNBOUNDED``) is replaced at solve time by the total capacity leaving
    the source, which no feasible flow can exceed.  An edge and its own
    reverse may not both be present.
    """

    def __init__(self, num_vertices: int, source: int, sink: int, labels: Sequence | None = None):
        if not (0 <= source < num_vertices and 0 <= sink < num_vertices) or source == sink:
            raise ValueError("source and sink must be distinct vertices")
        self.num_vertices = num_vertices
        self.source = source
        self.sink = sink
        self.labels = list(labels) if labels is not None else None
        self.edges: list[Edge] = []
        self._pairs: dict[tuple[int, int], int] = {}

    def add_edge(self, u: int, v: int, capacity: Optional[int], cost: int = 0) -> int:
        if not (0 <= u < self.num_vertices and 0 <= v < self.num_vertices):
            raise ValueError(f"edge ({u}, {v}) references a missing vertex")
        if u == v:
            raise ValueError(f"self-loop on vertex {u}")
        if (u, v) in self._pairs:
            raise ValueError(f"parallel edge ({u}, {v})")
        if (v, u) in self._pairs:
            raise ValueError(f"edge ({u}, {v}) is the reverse of an existing edge")
        if capacity is not None:
            if int(capacity) != capacity or capacity < 0:
                raise ValueError(f"capacity must be a nonnegative integer, got {capacity!r}")
            capacity = int(capacity)
        if int(cost) != cost:
            raise ValueError(f"cost must be an integer, got {cost!r}")
        self._pairs[(u, v)] = len(self.edges)
        self.edges.append(Edge(u, v, capacity, int(cost)))
        return len(self.edges) - 1

    def edge_index(self, u: int, v: int) -> int:
        return self._pairs[(u, v)]

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self._pairs

    def unbounded_value(self) -> int:
        total = 0
        for e in self.edges:
            if e.u == self.source:
                if e.capacity is None:
                    raise ValueError("edges leaving the source must have finite capacity")
                total += e.capacity
        return total

    def label(self, v: int) -> str:
        if self.labels is not None:
            return str(self.labels[v])
        return str(v)

    def dump(self, fh: IO[str], flow: "FlowAssignment | None" = None) -> None:
        """Write a ``u v cap cost flow`` edge list, one edge per line."""
        fh.write("# u v cap cost flow\n")
        for k, e in enumerate(self.edges):
            cap = "inf" if e.capacity is None else str(e.capacity)
            f = flow.flow[k] if flow is not None else 0
            fh.write(f"{self.label(e.u)} {self.label(e.v)} {cap} {e.cost} {f}\n")


@dataclass
class FlowAssignment:
    flow: list[int]
    total_flow: int = 0
    total_cost: int = 0
    path_costs: list[int] = field(default_factory=list)

    @classmethod
    def zero(cls, net: FlowNetwork) -> "FlowAssignment":
        return cls([0] * len(net.edges))


class _Residual:
    # Arc 2k is edge k forward, arc 2k+1 its reverse.
    __slots__ = ("n", "head", "cap", "cost", "out")

    def __init__(self, net: FlowNetwork, flow: Sequence[int] | None = None):
        big = None
        n = net.num_vertices
        head = []
        cap = []
        cost = []
        out = [[] for _ in range(n)]
        for k, e in enumerate(net.edges):
            c = e.capacity
            if c is None:
                if big is None:
                    big = net.unbounded_value()
                c = big
            f = flow[k] if flow is not None else 0
            if f < 0 or f > c:
                raise ValueError(f"flow {f} on edge ({e.u}, {e.v}) violates capacity {c}")
            out[e.u].append(2 * k)
            out[e.v].append(2 * k + 1)
            head.append(e.v)
            head.append(e.u)
            cap.append(c - f)
            cap.append(f)
            cost.append(e.cost)
            cost.append(-e.cost)
        self.n = n
        self.head = head
        self.cap = cap
        self.cost = cost
        self.out = out

    def shortest_path(self, s: int, t: int) -> tuple[Optional[int], list[int]]:
        """Min-cost s->t path over arcs with positive residual capacity.

        Returns ``(cost, arcs)`` or ``(None, [])`` when ``t`` is unreachable.
        """
        n = self.n
        head, cap, cost, out = self.head, self.cap, self.cost, self.out
        inf = float("inf")
        dist = [inf] * n
        pred = [-1] * n
        queued = [False] * n
        updates = [0] * n
        dist[s] = 0
        queue = deque([s])
        queued[s] = True
        while queue:
            u = queue.popleft()
            queued[u] = False
            du = dist[u]
            for a in out[u]:
                if cap[a] > 0:
                    v = head[a]
                    nd = du + cost[a]
                    if nd < dist[v]:
                        dist[v] = nd
                        pred[v] = a
                        if not queued[v]:
                            updates[v] += 1
                            if updates[v] > n:
                                raise NegativeCycleError(
                                    f"negative-cost cycle through vertex {v} in residual graph"
                                )
                            queue.append(v)
                            queued[v] = True
        if dist[t] == inf:
            return None, []
        arcs = []
        v = t
        while v != s:
            a = pred[v]
            arcs.append(a)
            v = head[a ^ 1]
            if len(arcs) > n:
                raise NegativeCycleError("predecessor graph contains a cycle")
        arcs.reverse()
        return int(dist[t]), arcs

    def vertices_of(self, s: int, arcs: list[int]) -> list[int]:
        return [s] + [self.head[a] for a in arcs]

    def flows(self) -> list[int]:
        return self.cap[1::2]


def find_min_cost_augmenting_path(net: FlowNetwork, flow: FlowAssignment | None = None) -> Optional[list[int]]:
    """Vertex sequence of a cheapest augmenting path, or ``None`` if the flow is maximum."""
    res = _Residual(net, flow.flow if flow is not None else None)
    c, arcs = res.shortest_path(net.source, net.sink)
    if c is None:
        return None
    return res.vertices_of(net.source, arcs)


def path_cost(net: FlowNetwork, path: Sequence[int], flow: FlowAssignment | None = None) -> int:
    """Sum of signed residual arc costs along ``path``.

    A step ``u -> v`` uses the forward edge ``(u, v)`` at cost ``+c`` when it
    still has room, otherwise the reverse of a flow-carrying ``(v, u)`` at
    ``-c``.  Raises ``ValueError`` when neither exists.
    """
    f = flow.flow if flow is not None else [0] * len(net.edges)
    big = None
    total = 0
    for u, v in zip(path, path[1:]):
        if net.has_edge(u, v):
            k = net.edge_index(u, v)
            e = net.edges[k]
            cap = e.capacity
            if cap is None:
                if big is None:
                    big = net.unbounded_value()
                cap = big
            if cap - f[k] > 0:
                total += e.cost
                continue
        if net.has_edge(v, u):
            k = net.edge_index(v, u)
            if f[k] > 0:
                total -= net.edges[k].cost
                continue
        raise ValueError(f"no residual arc {net.label(u)} -> {net.label(v)}")
    return total


def mcmf(net: FlowNetwork) -> FlowAssignment:
    """Maximum flow of minimum cost, by successive cheapest augmenting paths.

    The chosen path costs are recorded in ``path_costs`` and must be
    non-decreasing; a violation raises ``AssertionError``.
    """
    res = _Residual(net)
    s, t = net.source, net.sink
    total_flow = 0
    total_cost = 0
    path_costs: list[int] = []
    cap = res.cap
    while True:
        c, arcs = res.shortest_path(s, t)
        if c is None:
            break
        if path_costs and c < path_costs[-1]:
            raise AssertionError(f"augmenting path cost decreased: {path_costs[-1]} -> {c}")
        push = min(cap[a] for a in arcs)
        for a in arcs:
            cap[a] -= push
            cap[a ^ 1] += push
        total_flow += push
        total_cost += push * c
        path_costs.append(c)
    flow = res.flows()
    for f in flow:
        assert isinstance(f, int)
    return FlowAssignment(flow, total_flow, total_cost, path_costs)
