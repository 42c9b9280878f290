"""Deterministic simulated network and clock.

A single event queue owns simulated time.  Every cross-agent effect — message
delivery and timer expiry — is an event ordered by (due time, insertion
sequence), which makes runs with identical inputs bitwise reproducible and
preserves FIFO delivery per ordered pair of agents (per-pair latency is
constant within a run).
"""

from __future__ import annotations

import heapq
import logging
from typing import Callable, Optional

from .errors import Unroutable
from .wire import MessageEnvelope, NetConfig, envelope

log = logging.getLogger(__name__)

TIMER = "timer"
MESSAGE = "message"


class SimWorld:
    """Single-owner discrete event scheduler hosting every organization node."""

    def __init__(self, net: Optional[NetConfig] = None):
        self.net = net or NetConfig()
        self.net.validate()
        self.now_ms = 0
        self.nodes: dict[str, "object"] = {}  # org_name -> kernel.Node
        self._heap: list[tuple[int, int, str, Callable[[], None]]] = []
        self._seq = 0
        self._cancelled: set[int] = set()
        self._pending_messages = 0
        # observers called with every envelope accepted for delivery
        self.taps: list[Callable[[MessageEnvelope], None]] = []

    # -- node registry -------------------------------------------------

    def attach(self, node) -> None:
        self.nodes[node.org_name] = node

    def detach(self, org_name: str) -> None:
        self.nodes.pop(org_name, None)

    # -- scheduling ----------------------------------------------------

    def schedule(self, delay_ms: int, fn: Callable[[], None], kind: str = TIMER) -> int:
        if delay_ms < 0:
            delay_ms = 0
        self._seq += 1
        handle = self._seq
        if kind == MESSAGE:
            self._pending_messages += 1
        heapq.heappush(self._heap, (self.now_ms + delay_ms, handle, kind, fn))
        return handle

    def cancel(self, handle: int) -> None:
        self._cancelled.add(handle)

    # -- transport -----------------------------------------------------

    def send(self, env: MessageEnvelope) -> None:
        """Schedule delivery of one envelope on the simulated network."""
        receiver_org = env.receiver_org
        node = self.nodes.get(receiver_org)
        if node is None:
            raise Unroutable(f"no route to organization {receiver_org!r}")
        env.sent_at = self.now_ms
        for tap in self.taps:
            tap(env)
        latency = self.net.latency(env.sender_org, receiver_org)
        self.schedule(latency, lambda: node.deliver(env), kind=MESSAGE)

    def send_failure(self, original: MessageEnvelope, reason: str) -> None:
        """Return a FAILURE to the sender of an undeliverable envelope."""
        if original.performative == "FAILURE":
            return  # never bounce a bounce
        failure = envelope(
            "FAILURE",
            sender=original.receiver,
            receiver=original.sender,
            conversation_id=original.conversation_id,
            protocol=original.protocol,
            payload={
                "type": "dead-letter",
                "reason": reason,
                "original": {
                    "type": original.ptype,
                    "performative": original.performative,
                    "receiver": original.receiver,
                },
            },
        )
        try:
            self.send(failure)
        except Unroutable:
            log.warning("dropping failure notice for %s: sender unreachable", original)

    # -- execution -----------------------------------------------------

    def step(self) -> bool:
        """Run the next event; returns False when the queue is empty."""
        while self._heap:
            due, handle, kind, fn = heapq.heappop(self._heap)
            if kind == MESSAGE:
                self._pending_messages -= 1
            if handle in self._cancelled:
                self._cancelled.discard(handle)
                continue
            self.now_ms = max(self.now_ms, due)
            fn()
            return True
        return False

    def run_until(self, t_ms: int) -> None:
        """Execute every event due at or before ``t_ms``, then advance to it."""
        while self._heap:
            due = self._peek_due()
            if due is None or due > t_ms:
                break
            self.step()
        self.now_ms = max(self.now_ms, t_ms)

    def run_for(self, delta_ms: int) -> None:
        self.run_until(self.now_ms + delta_ms)

    def drain_messages(self, limit: int = 1_000_000) -> None:
        """Advance time until no message deliveries remain queued.

        Timers that become due along the way fire normally; periodic timers
        beyond the last pending message do not hold the loop open.
        """
        steps = 0
        while self._pending_messages > 0:
            if not self.step():
                break
            steps += 1
            if steps > limit:
                raise RuntimeError("drain_messages exceeded step limit")

    def quiescent(self) -> bool:
        """True when no message deliveries are in flight."""
        return self._pending_messages == 0

    def _peek_due(self) -> Optional[int]:
        while self._heap:
            due, handle, kind, _fn = self._heap[0]
            if handle in self._cancelled:
                heapq.heappop(self._heap)
                self._cancelled.discard(handle)
                if kind == MESSAGE:
                    self._pending_messages -= 1
                continue
            return due
        return None
