"""
graphs.py — Level Graphs
========================

Graph representations of the six-level atom:

- LevelGraph     undirected adjacency list over level labels
- CouplingGraph  optical couplings (one labelled edge per driven transition)
- DecayGraph     directed, weighted spontaneous-emission channels

The atomic model builds one graph of each kind and uses them to validate the
level scheme (allowed edges, branching sums) and to walk the coupling chain
when assigning rotating-frame energies.
"""

from collections import deque


class LevelGraph:
    """
    Undirected graph over atomic level labels using an adjacency list.

    Example:
    --------
    >>> g = LevelGraph()
    >>> g.add_edge("b", "a", "probe_a")
    >>> g.has_edge("a", "b")
    True
    """
    def __init__(self):
        self.graph = {}

    def add_vertex(self, v):
        if v not in self.graph:
            self.graph[v] = []

    def add_edge(self, v1, v2, label=None):
        if v1 == v2:
            raise ValueError(f"self-loop on level '{v1}' is not a transition")
        self.add_vertex(v1)
        self.add_vertex(v2)
        if not self.has_edge(v1, v2):
            self.graph[v1].append((v2, label))
            self.graph[v2].append((v1, label))

    def has_edge(self, v1, v2):
        return any(n == v2 for n, _ in self.graph.get(v1, []))

    def edges(self):
        """Return each undirected edge once as ``(v1, v2, label)`` in insertion order."""
        seen = set()
        out = []
        for v, neighbors in self.graph.items():
            for n, label in neighbors:
                key = frozenset((v, n))
                if key not in seen:
                    seen.add(key)
                    out.append((v, n, label))
        return out

    def walk(self, starts, labels=None):
        """
        Breadth-first walk from one or more start levels.

        Args:
            starts (Iterable): Levels to start from, visited in the given order.
            labels (Container, optional): Only follow edges whose label is in
                this container; follow every edge when omitted.

        Returns:
            List[tuple]: ``(parent, child, label)`` for every edge that reaches
            a new level, in visiting order.
        """
        visited = set()
        q = deque()
        for s in starts:
            if s not in visited:
                visited.add(s)
                q.append(s)
        steps = []
        while q:
            v = q.popleft()
            for n, label in self.graph.get(v, []):
                if labels is not None and label not in labels:
                    continue
                if n not in visited:
                    visited.add(n)
                    steps.append((v, n, label))
                    q.append(n)
        return steps


class CouplingGraph(LevelGraph):
    """
    Optical couplings of the level scheme, validated against an allowed edge set.

    Parameters
    ----------
    allowed : Mapping[frozenset, str]
        Allowed transitions mapped to the coupling name that may drive them.

    Example
    -------
    >>> cg = CouplingGraph({frozenset(("b", "a")): "probe_a"})
    >>> cg.add_coupling("probe_a", "b", "a")
    >>> cg.add_coupling("omega", "b", "c")
    Traceback (most recent call last):
    ...
    ValueError: coupling 'omega' on (b, c) is not part of the level scheme
    """
    def __init__(self, allowed):
        super().__init__()
        self.allowed = dict(allowed)

    def add_coupling(self, name, lower, upper):
        key = frozenset((lower, upper))
        if self.allowed.get(key) != name:
            raise ValueError(
                f"coupling '{name}' on ({lower}, {upper}) is not part of the level scheme"
            )
        if self.has_edge(lower, upper):
            raise ValueError(f"transition ({lower}, {upper}) is driven twice")
        self.add_edge(lower, upper, name)

    def is_complete(self):
        """True when every allowed transition carries its coupling."""
        present = {frozenset((v1, v2)): label for v1, v2, label in self.edges()}
        return present == self.allowed

    def missing(self):
        present = {frozenset((v1, v2)) for v1, v2, _ in self.edges()}
        return sorted(name for key, name in self.allowed.items() if key not in present)


class DecayGraph:
    """
    Directed weighted graph of decay channels ``upper -> lower``.

    Each edge stores the total decay rate of the upper level and the fraction
    of it that ends in ``lower``.

    Example:
    --------
    >>> dg = DecayGraph()
    >>> dg.add_channel("a", "b", 3.6e7, 0.5)
    >>> dg.add_channel("a", "c", 3.6e7, 0.5)
    >>> dg.branching_sum("a")
    1.0
    """
    def __init__(self):
        self.graph = {}

    def add_vertex(self, v):
        if v not in self.graph:
            self.graph[v] = []

    def add_channel(self, upper, lower, rate, branching):
        if rate < 0:
            raise ValueError(f"decay rate of '{upper}' must be >= 0, got {rate}")
        if not 0.0 <= branching <= 1.0:
            raise ValueError(
                f"branching fraction {upper}->{lower} must lie in [0, 1], got {branching}"
            )
        if upper == lower:
            raise ValueError(f"level '{upper}' cannot decay into itself")
        self.add_vertex(upper)
        self.add_vertex(lower)
        self.graph[upper].append((lower, rate, branching))

    def branching_sum(self, upper):
        return sum(br for _, _, br in self.graph.get(upper, []))

    def emitters(self):
        return [v for v, out in self.graph.items() if out]


__all__ = ["LevelGraph", "CouplingGraph", "DecayGraph"]
