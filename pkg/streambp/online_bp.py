import logging
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from streambp.bp_kernel import KernelParams, check_label, make_engine
from streambp.evaluation import Estimates
from streambp.graph import StreamingGraph

logger = logging.getLogger(__name__)


class MessageStore:
    """
    Messages on directed edges, grouped by receiving vertex: ``inbox(v)[u]`` is the message
    ``u -> v``. Dict insertion order is the order edges were created, which fixes the order in
    which incoming messages are combined.
    """

    def __init__(self):
        self._inbox: Dict[int, Dict[int, Any]] = {}

    def add_vertex(self, vertex: int) -> None:
        self._inbox.setdefault(vertex, {})

    def add_edge(self, u: int, v: int, forward: Any, backward: Any) -> None:
        self._inbox[v][u] = forward
        self._inbox[u][v] = backward

    def get(self, u: int, v: int) -> Any:
        return self._inbox[v][u]

    def set(self, u: int, v: int, message: Any) -> None:
        inbox = self._inbox[v]
        if u not in inbox:
            raise KeyError(f"No edge {u} -> {v} in the message store")
        inbox[u] = message

    def inbox(self, vertex: int) -> Dict[int, Any]:
        return self._inbox[vertex]

    def others(self, sender: int, exclude: int) -> List[Any]:
        """Messages into ``sender`` from every neighbor except ``exclude``."""
        return [m for u, m in self._inbox[sender].items() if u != exclude]

    def items(self) -> Iterator[Tuple[Tuple[int, int], Any]]:
        for v, inbox in self._inbox.items():
            for u, message in inbox.items():
                yield (u, v), message

    def __len__(self) -> int:
        return sum(len(inbox) for inbox in self._inbox.values())


class _OnlineBp:
    """Shared bookkeeping for the streaming BP variants: graph, side labels, messages, work counters."""

    name = "online-bp"

    def __init__(self, params: KernelParams, radius: int, engine: str = "auto"):
        if radius < 0:
            raise ValueError(f"Radius must be non-negative, got {radius}")
        self.params = params
        self.radius = radius
        self.engine = make_engine(params, engine)
        self.graph = StreamingGraph()
        self.messages = MessageStore()
        self.side: Dict[int, Optional[int]] = {}
        self.messages_touched = 0
        self.last_touched = 0

    def _new_message(self) -> Any:
        return self.engine.uniform()

    def _register(self, side_label: Optional[int], new_edges: Sequence[int], vertex: Optional[int]) -> int:
        check_label(side_label, self.params.k)
        self.graph.insert_vertex(new_edges, vertex=vertex)
        v = self.graph.arrival_order[-1]
        self.side[v] = side_label
        self.messages.add_vertex(v)
        for u in sorted(int(u) for u in new_edges):
            self.messages.add_edge(u, v, self._new_message(), self._new_message())
        return v

    def _final_inputs(self, vertex: int) -> List[Any]:
        return list(self.messages.inbox(vertex).values())

    def finalize(self) -> Estimates:
        """
        Vertex beliefs from every incoming message and the side label; labels are the argmax
        with ties going to the lowest label. The state is left untouched.
        """
        engine = self.engine
        vertices = sorted(self.graph.vertices())
        labels = np.empty(len(vertices), dtype=np.int64)
        beliefs = np.empty((len(vertices), self.params.k))
        for i, v in enumerate(vertices):
            message = engine.combine(self._final_inputs(v), self.side[v])
            labels[i] = engine.label(message)
            beliefs[i] = engine.to_belief(message)
        return Estimates(vertices=np.array(vertices, dtype=np.int64), labels=labels, beliefs=beliefs)


class StreamBP(_OnlineBp):
    """
    Streaming belief propagation: one message per directed edge.

    On each arrival the messages from the new vertex's neighbors into it are recomputed, then
    messages are pushed outward along every shortest path of the radius-R ball, shell by shell.
    """

    name = "streambp"

    def insert(self, side_label: Optional[int], new_edges: Sequence[int], vertex: Optional[int] = None) -> int:
        v = self._register(side_label, new_edges, vertex)
        engine, store, side = self.engine, self.messages, self.side
        touched = 0

        for w in self.graph.neighbors(v):
            store.set(w, v, engine.combine(store.others(w, v), side[w]))
            touched += 1

        if self.radius >= 1 and new_edges:
            ball = self.graph.ball(v, self.radius)
            for r in range(1, self.radius + 1):
                for x in ball.shells[r]:
                    for parent in self.graph.shortest_path_parents(ball, x):
                        store.set(parent, x, engine.combine(store.others(parent, x), side[parent]))
                        touched += 1

        self.last_touched = touched
        self.messages_touched += touched
        return self.graph.arrival_step[v]


class StreamBPStar(_OnlineBp):
    """
    Bounded-distance streaming BP: every directed edge carries messages indexed 0..R, index 0
    fixed to uniform and index i computed from index i - 1 messages. Final beliefs read index
    R, so each estimate depends only on the radius-R ball around the vertex.
    """

    name = "streambp-star"

    def _new_message(self) -> np.ndarray:
        return self.engine.uniform_layers(self.radius)

    def _final_inputs(self, vertex: int) -> List[Any]:
        return [layers[self.radius] for layers in self.messages.inbox(vertex).values()]

    def _refresh(self, sender: int, receiver: int) -> None:
        store = self.messages
        layers = self.engine.combine_layers(store.others(sender, receiver), self.side[sender], self.radius)
        store.set(sender, receiver, layers)

    def insert(self, side_label: Optional[int], new_edges: Sequence[int], vertex: Optional[int] = None) -> int:
        v = self._register(side_label, new_edges, vertex)
        per_edge = self.radius + 1
        touched = 0

        neighbors = self.graph.neighbors(v)
        for w in neighbors:
            self._refresh(w, v)
            touched += per_edge
        for w in neighbors:
            self._refresh(v, w)
            touched += per_edge

        if self.radius >= 2 and neighbors:
            ball = self.graph.ball(v, self.radius)
            for r in range(2, self.radius + 1):
                for x in ball.shells[r]:
                    for parent in self.graph.shortest_path_parents(ball, x):
                        self._refresh(parent, x)
                        touched += per_edge

        self.last_touched = touched
        self.messages_touched += touched
        return self.graph.arrival_step[v]


ONLINE_ALGORITHMS = {
    StreamBP.name: StreamBP,
    StreamBPStar.name: StreamBPStar,
}
