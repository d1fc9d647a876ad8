"""Discrete-step in-process message bus with fault injection."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from src.models.message_model import MessageKind, PhaseMessage, endpoint_id, is_db
from src.models.params_model import FaultConfig
from src.utils.wire import encode_message, transcript_line

logger = logging.getLogger(__name__)


@dataclass(order=True)
class _Pending:
    deliver_at: int
    seq: int
    msg: PhaseMessage = field(compare=False)


class FaultInjector:
    """Applies a FaultConfig to outbound traffic."""

    def __init__(self, faults: FaultConfig, q: int, rng: np.random.Generator):
        self.faults = faults
        self.q = q
        self.rng = rng
        self._history: dict[tuple[str, MessageKind], list[list[int]]] = {}

    def silenced(self, msg: PhaseMessage) -> bool:
        sender = endpoint_id(msg.sender)
        if is_db(msg.sender):
            return sender in self.faults.dropped_dbs or sender == self.faults.failed_db
        return sender in self.faults.dropped_clients

    def delay(self, msg: PhaseMessage) -> int:
        if not is_db(msg.sender) and endpoint_id(msg.sender) in self.faults.late_clients:
            return self.faults.late_delay
        return 0

    def corrupt(self, msg: PhaseMessage) -> PhaseMessage:
        if not is_db(msg.sender) or endpoint_id(msg.sender) not in self.faults.adversary_set or not msg.payload:
            return msg
        honest = list(msg.payload)
        key = (msg.sender, msg.kind)
        earlier = [p for p in self._history.get(key, []) if len(p) == len(honest) and p != honest]
        self._history.setdefault(key, []).append(honest)
        strategy = self.faults.corruption
        if strategy == "replay" and earlier:
            payload = earlier[-1]
        elif strategy == "random":
            payload = [int(v) for v in self.rng.integers(0, self.q, size=len(honest))]
        else:
            payload = [(v + 1) % self.q for v in honest]
        return msg.model_copy(update={"payload": payload})


class MessageBus:
    """FIFO per (sender, receiver); messages become visible one step after sending plus any delay."""

    def __init__(self, injector: Optional[FaultInjector] = None):
        self.injector = injector
        self.step = 0
        self._seq = 0
        self._pending: list[_Pending] = []
        self._inboxes: dict[str, list[PhaseMessage]] = {}
        self.transcript: list[tuple[int, PhaseMessage]] = []

    def send(self, msg: PhaseMessage) -> None:
        delay = 0
        if self.injector is not None:
            if self.injector.silenced(msg):
                return
            msg = self.injector.corrupt(msg)
            delay = self.injector.delay(msg)
        self.transcript.append((self.step, msg))
        self._pending.append(_Pending(self.step + 1 + delay, self._seq, msg))
        self._seq += 1

    def send_all(self, messages) -> None:
        for msg in messages:
            self.send(msg)

    def advance(self, steps: int = 1) -> None:
        for _ in range(steps):
            self.step += 1
            due = sorted(p for p in self._pending if p.deliver_at <= self.step)
            self._pending = [p for p in self._pending if p.deliver_at > self.step]
            for pending in due:
                self._inboxes.setdefault(pending.msg.receiver, []).append(pending.msg)

    def flush(self) -> None:
        """Deliver everything still in flight."""
        if self._pending:
            self.advance(max(p.deliver_at for p in self._pending) - self.step)

    def collect(
        self,
        receiver: str,
        kind: Optional[MessageKind] = None,
        where: Optional[Callable[[PhaseMessage], bool]] = None,
    ) -> list[PhaseMessage]:
        inbox = self._inboxes.get(receiver, [])
        taken, kept = [], []
        for msg in inbox:
            if (kind is None or msg.kind == kind) and (where is None or where(msg)):
                taken.append(msg)
            else:
                kept.append(msg)
        self._inboxes[receiver] = kept
        return taken

    def touching(self, endpoints: set[str]) -> list[tuple[int, PhaseMessage]]:
        """Every transcript record an observer of these endpoints sees."""
        return [(step, msg) for step, msg in self.transcript if msg.sender in endpoints or msg.receiver in endpoints]

    def transcript_lines(self) -> list[str]:
        return [transcript_line(step, msg) for step, msg in self.transcript]

    def transcript_hash(self) -> str:
        digest = hashlib.sha256()
        for step, msg in self.transcript:
            digest.update(step.to_bytes(4, "little"))
            digest.update(encode_message(msg))
        return digest.hexdigest()
