import bisect
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

logger = logging.getLogger(__name__)


class InvalidEdgeError(ValueError):
    """Raised when an edge references an absent endpoint, is a self-loop, or reuses a vertex id"""
    pass


class DuplicateEdgeError(ValueError):
    """Raised when the same endpoint appears twice in one arrival"""
    pass


class OutOfStreamError(ValueError):
    """Raised when a vertex is queried before its arrival step"""
    pass


@dataclass
class NeighborhoodBall:
    """
    Shells D_0..D_R around ``center`` in the graph induced by the first ``time`` arrivals.

    ``shells[r]`` lists the vertices at distance exactly r, sorted by id. Shells past the
    component boundary are empty so ``len(shells) == radius + 1`` always holds.
    """
    center: int
    radius: int
    time: int
    shells: List[List[int]]
    distance: Dict[int, int] = field(default_factory=dict)

    @property
    def vertices(self) -> Set[int]:
        return set(self.distance)

    def shell_of(self, vertex: int) -> Optional[int]:
        return self.distance.get(vertex)


class StreamingGraph:
    """
    Undirected simple graph revealed one vertex at a time.

    Each arrival brings the edges from the new vertex to previously revealed vertices.
    Steps are 1-based: the vertex revealed at step t is ``arrival_order[t - 1]`` and
    ``arrival_step[v] == t``. Neighbor lists are kept sorted by vertex id.
    """

    def __init__(self):
        self._adjacency: Dict[int, List[int]] = {}
        self.arrival_order: List[int] = []
        self.arrival_step: Dict[int, int] = {}
        self.num_edges = 0

    @classmethod
    def from_arrivals(cls, arrival_order: Sequence[int], edges: Iterable[Tuple[int, int]]) -> "StreamingGraph":
        """
        Replay a recorded graph: reveal ``arrival_order`` one vertex at a time, each with its
        edges to earlier vertices.
        """
        step = {int(v): t for t, v in enumerate(arrival_order, start=1)}
        if len(step) != len(arrival_order):
            raise InvalidEdgeError("Arrival order lists a vertex more than once")

        pending: Dict[int, List[int]] = {v: [] for v in step}
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise InvalidEdgeError(f"Self-loop at vertex {u}")
            if u not in step or v not in step:
                raise InvalidEdgeError(f"Edge ({u}, {v}) references a vertex outside the arrival order")
            earlier, later = (u, v) if step[u] < step[v] else (v, u)
            pending[later].append(earlier)

        graph = cls()
        for vertex in arrival_order:
            graph.insert_vertex(pending[int(vertex)], vertex=int(vertex))
        return graph

    @property
    def num_vertices(self) -> int:
        return len(self.arrival_order)

    @property
    def current_step(self) -> int:
        return len(self.arrival_order)

    def __contains__(self, vertex: int) -> bool:
        return vertex in self.arrival_step

    def __len__(self) -> int:
        return len(self.arrival_order)

    def vertices(self) -> List[int]:
        return list(self.arrival_order)

    def has_arrived(self, vertex: int, time: Optional[int] = None) -> bool:
        step = self.arrival_step.get(vertex)
        if step is None:
            return False
        return time is None or step <= time

    def neighbors(self, vertex: int, time: Optional[int] = None) -> List[int]:
        """Sorted neighbors of ``vertex`` in the step-``time`` graph (current graph when omitted), as a new list."""
        return list(self._neighbors(vertex, time))

    def _neighbors(self, vertex: int, time: Optional[int]) -> List[int]:
        # may return the adjacency list itself; callers must not mutate it
        adjacency = self._adjacency[vertex]
        if time is None or time >= self.current_step:
            return adjacency
        return [u for u in adjacency if self.arrival_step[u] <= time]

    def degree(self, vertex: int, time: Optional[int] = None) -> int:
        return len(self._neighbors(vertex, time))

    def edges(self) -> Iterator[Tuple[int, int]]:
        """Yield every edge once as ``(u, v)`` with ``u < v``."""
        for u in sorted(self._adjacency):
            for v in self._adjacency[u]:
                if u < v:
                    yield u, v

    def insert_vertex(self, new_edges: Sequence[int], vertex: Optional[int] = None) -> int:
        """
        Reveal a new vertex together with its edges to already revealed vertices.

        Args:
            new_edges: Endpoints (already revealed) the new vertex connects to.
            vertex: Id of the new vertex. Defaults to the next dense id.

        Returns:
            int: The 1-based step index of the arrival.
        """
        if vertex is None:
            vertex = self.num_vertices
        vertex = int(vertex)
        if vertex in self.arrival_step:
            raise InvalidEdgeError(f"Vertex {vertex} has already arrived at step {self.arrival_step[vertex]}")

        endpoints = [int(u) for u in new_edges]
        seen = set()
        for u in endpoints:
            if u not in self.arrival_step:
                raise InvalidEdgeError(f"Edge ({vertex}, {u}) references vertex {u}, which has not arrived")
            if u in seen:
                raise DuplicateEdgeError(f"Edge ({vertex}, {u}) listed more than once")
            seen.add(u)

        self.arrival_order.append(vertex)
        step = len(self.arrival_order)
        self.arrival_step[vertex] = step
        self._adjacency[vertex] = sorted(endpoints)
        for u in endpoints:
            bisect.insort(self._adjacency[u], vertex)
        self.num_edges += len(endpoints)
        return step

    def arrivals(self) -> Iterator[Tuple[int, List[int]]]:
        """Yield ``(vertex, earlier_neighbors)`` in arrival order, replaying the recorded stream."""
        for step, vertex in enumerate(self.arrival_order, start=1):
            yield vertex, [u for u in self._adjacency[vertex] if self.arrival_step[u] < step]

    def prefix(self, time: int) -> "StreamingGraph":
        """The graph induced by the first ``time`` arrivals, as an independent copy."""
        snapshot = StreamingGraph()
        for step, (vertex, earlier) in enumerate(self.arrivals(), start=1):
            if step > time:
                break
            snapshot.insert_vertex(earlier, vertex=vertex)
        return snapshot

    def ball(self, center: int, radius: int, time: Optional[int] = None) -> NeighborhoodBall:
        """
        Breadth-first shells around ``center`` up to ``radius`` in the step-``time`` graph.

        Raises:
            OutOfStreamError: ``center`` has not arrived by ``time``.
        """
        if radius < 0:
            raise ValueError(f"Radius must be non-negative, got {radius}")
        time = self.current_step if time is None else min(time, self.current_step)
        if not self.has_arrived(center, time):
            raise OutOfStreamError(f"Vertex {center} has not arrived by step {time}")

        distance = {center: 0}
        shells = [[center]]
        frontier = [center]
        for r in range(1, radius + 1):
            shell = set()
            for x in frontier:
                for y in self._neighbors(x, time):
                    if y not in distance:
                        distance[y] = r
                        shell.add(y)
            frontier = sorted(shell)
            shells.append(frontier)
        return NeighborhoodBall(center=center, radius=radius, time=time, shells=shells, distance=distance)

    def shortest_path_parents(self, ball: NeighborhoodBall, vertex: int) -> List[int]:
        """
        All neighbors of ``vertex`` one shell closer to the ball center, ascending by id.
        On trees this is the unique predecessor on the path to the center.
        """
        r = ball.distance.get(vertex)
        if r is None or r == 0:
            raise ValueError(f"Vertex {vertex} is not in a shell r >= 1 of the ball around {ball.center}")
        return [u for u in self._neighbors(vertex, ball.time) if ball.distance.get(u) == r - 1]

    def ball_edge_count(self, ball: NeighborhoodBall) -> int:
        """Number of edges with both endpoints inside the ball."""
        inside = ball.distance
        count = 0
        for x in inside:
            for y in self._neighbors(x, ball.time):
                if y in inside and x < y:
                    count += 1
        return count
