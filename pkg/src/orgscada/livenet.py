"""Wall-clock runtime and stream-socket transport.

LiveWorld mirrors the SimWorld surface (schedule/cancel/send/attach) but runs
against real time: a single scheduler thread executes every timer and message
delivery, which preserves the agent serialization guarantee of the simulated
runtime.  Organizations on other hosts are reached over TCP using the same
length-prefixed frames as the codec golden files.
"""

from __future__ import annotations

import heapq
import logging
import socket
import struct
import threading
import time
from typing import Callable, Optional

from .errors import ConnectTimeout, ConnectionRefusedByPeer, Unroutable
from .simnet import MESSAGE, TIMER
from .wire import MAX_FRAME_BODY, MessageEnvelope, decode, encode, envelope

log = logging.getLogger(__name__)


def tcp_connect(address: str, timeout_s: float = 5.0) -> socket.socket:
    """Open one platform link to a peer node listening at host:port."""
    host, _, port = address.rpartition(":")
    try:
        return socket.create_connection((host, int(port)), timeout=timeout_s)
    except ConnectionRefusedError as exc:
        raise ConnectionRefusedByPeer(address) from exc
    except socket.timeout as exc:
        raise ConnectTimeout(address) from exc
    except OSError as exc:
        raise Unroutable(f"{address}: {exc}") from exc


def read_frame(sock: socket.socket) -> Optional[bytes]:
    """Read one length-prefixed frame; None on orderly shutdown."""
    header = _read_exact(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME_BODY:
        raise ValueError(f"frame of {length} bytes exceeds bound")
    body = _read_exact(sock, length)
    if body is None:
        return None
    return header + body


def _read_exact(sock: socket.socket, n: int) -> Optional[bytes]:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


class LiveWorld:
    """Wall-clock scheduler hosting local nodes, with TCP routes to peers."""

    def __init__(self):
        self.nodes: dict[str, object] = {}
        self.peers: dict[str, str] = {}  # org_name -> host:port
        self._t0 = time.monotonic()
        self._heap: list[tuple[float, int, str, Callable[[], None]]] = []
        self._seq = 0
        self._cancelled: set[int] = set()
        self._lock = threading.RLock()
        self._wake = threading.Condition(self._lock)
        self._running = False
        self._thread: Optional[threading.Thread] = None
        self._listeners: list[socket.socket] = []
        self._links: dict[str, socket.socket] = {}
        self.taps: list[Callable[[MessageEnvelope], None]] = []

    @property
    def now_ms(self) -> int:
        return int((time.monotonic() - self._t0) * 1000)

    # -- node/peer registry ---------------------------------------------

    def attach(self, node) -> None:
        self.nodes[node.org_name] = node

    def detach(self, org_name: str) -> None:
        self.nodes.pop(org_name, None)

    def add_peer(self, org_name: str, address: str) -> None:
        self.peers[org_name] = address

    # -- scheduling ------------------------------------------------------

    def schedule(self, delay_ms: int, fn: Callable[[], None], kind: str = TIMER) -> int:
        due = time.monotonic() + max(0, delay_ms) / 1000.0
        with self._wake:
            self._seq += 1
            handle = self._seq
            heapq.heappush(self._heap, (due, handle, kind, fn))
            self._wake.notify()
        return handle

    def cancel(self, handle: int) -> None:
        with self._wake:
            self._cancelled.add(handle)

    def call(self, fn: Callable, timeout_s: float = 10.0):
        """Run fn on the scheduler thread and return its result.

        Everything that touches agent or registry state must go through here
        (or arrive as a message) so that all effects stay serialized.
        """
        done = threading.Event()
        box: dict = {}

        def wrapper():
            try:
                box["result"] = fn()
            except Exception as exc:  # surfaced to the caller below
                box["error"] = exc
            finally:
                done.set()

        self.schedule(0, wrapper)
        if not done.wait(timeout_s):
            raise TimeoutError("scheduler call timed out")
        if "error" in box:
            raise box["error"]
        return box.get("result")

    # -- transport -------------------------------------------------------

    def send(self, env: MessageEnvelope) -> None:
        receiver_org = env.receiver_org
        env.sent_at = self.now_ms
        for tap in self.taps:
            tap(env)
        node = self.nodes.get(receiver_org)
        if node is not None:
            self.schedule(0, lambda: node.deliver(env), kind=MESSAGE)
            return
        address = self.peers.get(receiver_org)
        if address is None:
            raise Unroutable(f"no route to organization {receiver_org!r}")
        frame = encode(env)
        sock = self._links.get(receiver_org)
        try:
            if sock is None:
                sock = tcp_connect(address)
                self._links[receiver_org] = sock
            sock.sendall(frame)
        except (OSError, ConnectionRefusedByPeer, ConnectTimeout) as exc:
            self._drop_link(receiver_org)
            raise Unroutable(f"{receiver_org} at {address}: {exc}") from exc

    def _drop_link(self, org_name: str) -> None:
        sock = self._links.pop(org_name, None)
        if sock is not None:
            try:
                sock.close()
            except OSError:
                pass

    def send_failure(self, original: MessageEnvelope, reason: str) -> None:
        if original.performative == "FAILURE":
            return
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

    # -- inbound listener ------------------------------------------------

    def listen(self, address: str) -> str:
        """Accept peer connections at host:port; returns the bound address."""
        host, _, port = address.rpartition(":")
        server = socket.create_server((host or "127.0.0.1", int(port)))
        self._listeners.append(server)
        bound = f"{server.getsockname()[0]}:{server.getsockname()[1]}"
        threading.Thread(target=self._accept_loop, args=(server,), daemon=True).start()
        return bound

    def _accept_loop(self, server: socket.socket) -> None:
        while True:
            try:
                conn, _addr = server.accept()
            except OSError:
                return
            threading.Thread(target=self._reader_loop, args=(conn,), daemon=True).start()

    def _reader_loop(self, conn: socket.socket) -> None:
        try:
            while True:
                frame = read_frame(conn)
                if frame is None:
                    return
                try:
                    env = decode(frame)
                except Exception as exc:
                    log.warning("dropping malformed inbound frame: %s", exc)
                    continue
                node = self.nodes.get(env.receiver_org)
                if node is None:
                    log.warning("inbound frame for unknown org %s", env.receiver_org)
                    continue
                self.schedule(0, lambda e=env, n=node: n.deliver(e), kind=MESSAGE)
        except (OSError, ValueError) as exc:
            log.warning("peer link closed: %s", exc)
        finally:
            try:
                conn.close()
            except OSError:
                pass

    # -- scheduler thread ------------------------------------------------

    def start(self) -> None:
        if self._running:
            return
        self._running = True
        self._thread = threading.Thread(target=self._run_loop, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        with self._wake:
            self._running = False
            self._wake.notify()
        for server in self._listeners:
            try:
                server.close()
            except OSError:
                pass
        for org in list(self._links):
            self._drop_link(org)
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None

    def _run_loop(self) -> None:
        while True:
            with self._wake:
                if not self._running:
                    return
                now = time.monotonic()
                fn = None
                while self._heap:
                    due, handle, kind, candidate = self._heap[0]
                    if handle in self._cancelled:
                        heapq.heappop(self._heap)
                        self._cancelled.discard(handle)
                        continue
                    if due <= now:
                        heapq.heappop(self._heap)
                        fn = candidate
                    break
                if fn is None:
                    timeout = (self._heap[0][0] - now) if self._heap else None
                    self._wake.wait(timeout)
                    continue
            # execute outside the lock; this thread is the only executor,
            # so agent handlers remain serialized
            try:
                fn()
            except Exception:
                log.exception("unhandled error in scheduled task")
