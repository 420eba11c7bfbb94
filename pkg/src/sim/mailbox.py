"""Round-boundary hand-off of inter-robot messages.

Robots never touch each other's graphs. Each half of an inter-robot factor
posts its variable->factor message addressed to the peer's mirror factor;
the peer reads it before its next round.
"""
from __future__ import annotations

from collections import defaultdict
from typing import Iterator, NamedTuple

from src.gbp.factorgraph import FactorGraph, decode_payload, encode_payload
from src.gbp.gaussian import CanonicalGaussian


class Envelope(NamedTuple):
    factor_id: str
    sender: str
    data: bytes


class Mailbox:
    def __init__(self):
        self._boxes: dict[int, list[Envelope]] = defaultdict(list)
        self.delivered = 0

    def post(self, recipient: int, factor_id: str, sender: str, payload: CanonicalGaussian) -> None:
        self._boxes[recipient].append(Envelope(factor_id, sender, encode_payload(payload)))

    def collect(self, recipient: int) -> Iterator[tuple[str, str, CanonicalGaussian]]:
        for env in self._boxes.pop(recipient, []):
            yield env.factor_id, env.sender, decode_payload(env.data)

    def pending(self) -> int:
        return sum(len(box) for box in self._boxes.values())

    def clear(self) -> None:
        self._boxes.clear()


def post_outgoing(mailbox: Mailbox, graph: FactorGraph) -> int:
    """Post the local side of every live inter-robot factor."""
    sent = 0
    for f in graph.inter_robot_factors():
        if not graph.is_live(f):
            continue
        for v_id in f.local_neighbors:
            mailbox.post(f.remote.peer, f.remote.mirror_id, v_id, f.inbox[v_id])
            sent += 1
    return sent


def deliver_incoming(mailbox: Mailbox, robot_id: int, graph: FactorGraph) -> int:
    """Write received messages into the remote side of matching factors.

    Messages for factors that no longer exist or are frozen are dropped.
    """
    received = 0
    for factor_id, sender, payload in mailbox.collect(robot_id):
        f = graph.factors.get(factor_id)
        if f is None or f.remote is None or f.remote.var_id != sender or not graph.is_live(f):
            continue
        f.inbox[sender] = payload
        received += 1
    mailbox.delivered += received
    return received
