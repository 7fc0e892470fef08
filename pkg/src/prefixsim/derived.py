"""Primitives derived from the consensus family.

* Graded consensus maps one length-one consistent-prefix instance onto
  the classic (value, grade) interface, and back: running one graded
  instance per coordinate reconstructs a consistent-prefix instance.
* Binary consensus runs the strong layer on a single-bit vector and
  decides from the agreed output.
* Validated consensus disseminates inputs, runs the strong layer on the
  collected vector, and decides the first entry passing the validity
  predicate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

from . import wire
from .actions import Broadcast, Output, StartTimer
from .crypto import Scheme
from .pc import PcConfig, PcEngine, Variant
from .prefixes import Vector
from .spc import SpcConfig, SpcEngine


def graded_from_pc(low: Vector, high: Vector) -> Tuple[Optional[bytes], int]:
    """Map a length-<=1 consistent-prefix output pair to (value, grade)."""
    if len(low) > 1 or len(high) > 1:
        raise ValueError("graded mapping requires length-<=1 outputs")
    if len(high) == 0:
        return None, 0
    if len(low) == 0:
        return high[0], 1
    return low[0], 2


def pc_from_graded(pairs: List[Tuple[Optional[bytes], int]]) -> Tuple[Vector, Vector]:
    """Rebuild (low, high) from per-coordinate graded outputs: low is the
    longest all-grade-2 prefix, high the longest all-grade->=1 prefix."""
    low: list = []
    high: list = []
    for value, grade in pairs:
        if grade < 1:
            break
        high.append(value)
        if grade == 2 and len(low) == len(high) - 1:
            low.append(value)
    return tuple(low[: len(high)]), tuple(high)


@dataclass(frozen=True)
class LaneMsg:
    """Envelope for one of several parallel instances."""

    inst: tuple
    lane: int
    inner: object


@dataclass(frozen=True)
class ValInput:
    inst: tuple
    payload: bytes


for _tag, _cls in ((50, LaneMsg), (51, ValInput)):
    wire.register(_tag)(_cls)


class GradedEngine:
    """Graded consensus backed by one length-one prefix instance."""

    def __init__(self, n: int, f: int, party: int, scheme: Scheme, instance: tuple = ("graded",)):
        self.cfg = PcConfig(n, f, 1, Variant.THREE_ROUND, instance)
        self.inner = PcEngine(self.cfg, party, scheme)
        self.decided = False

    def on_input(self, value: bytes) -> list:
        return self._relay(self.inner.on_input((value,)))

    def on_message(self, sender: int, msg) -> list:
        return self._relay(self.inner.on_message(sender, msg))

    def _relay(self, actions: list) -> list:
        out: list = []
        for act in actions:
            if isinstance(act, Output):
                if self.inner.done and not self.decided:
                    self.decided = True
                    low, _ = self.inner.outputs["low"]
                    high, _ = self.inner.outputs["high"]
                    out.append(Output("graded", graded_from_pc(low, high)))
            else:
                out.append(act)
        return out


class PcFromGradedEngine:
    """Consistent prefix consensus rebuilt from L parallel graded lanes."""

    def __init__(self, n: int, f: int, L: int, party: int, scheme: Scheme, instance: tuple = ("pcg",)):
        self.instance = instance
        self.L = L
        self.lanes = [
            GradedEngine(n, f, party, scheme, instance + ("lane", k)) for k in range(L)
        ]
        self.results: Dict[int, Tuple[Optional[bytes], int]] = {}
        self.emitted = False

    def on_input(self, value: Vector) -> list:
        if len(value) != self.L:
            raise ValueError("input length mismatch")
        actions: list = []
        for lane, elem in enumerate(value):
            actions.extend(self._relay(lane, self.lanes[lane].on_input(elem)))
        return actions

    def on_message(self, sender: int, msg) -> list:
        if not isinstance(msg, LaneMsg) or msg.inst != self.instance:
            return []
        if not isinstance(msg.lane, int) or not 0 <= msg.lane < self.L:
            return []
        return self._relay(msg.lane, self.lanes[msg.lane].on_message(sender, msg.inner))

    def _relay(self, lane: int, actions: list) -> list:
        out: list = []
        for act in actions:
            if isinstance(act, Broadcast):
                out.append(Broadcast(LaneMsg(self.instance, lane, act.msg)))
            elif isinstance(act, Output):
                self.results[lane] = act.value
                if len(self.results) == self.L and not self.emitted:
                    self.emitted = True
                    low, high = pc_from_graded([self.results[k] for k in range(self.L)])
                    out.append(Output("low", low))
                    out.append(Output("high", high))
        return out


class BinaryEngine:
    """Binary consensus: the strong layer on a one-bit vector."""

    def __init__(self, n: int, f: int, delta_cap, party: int, scheme: Scheme, instance: tuple = ("binary",)):
        self.inner = SpcEngine(SpcConfig(n, f, 1, delta_cap, instance), party, scheme)
        self.decided = False

    def on_input(self, bit: int) -> list:
        return self._relay(self.inner.on_input((bytes([bit]),)))

    def on_message(self, sender: int, msg) -> list:
        return self._relay(self.inner.on_message(sender, msg))

    def on_timer(self, key: tuple) -> list:
        return self._relay(self.inner.on_timer(key))

    def _relay(self, actions: list) -> list:
        out: list = []
        for act in actions:
            out.append(act)
            if isinstance(act, Output) and act.kind == "high" and not self.decided:
                self.decided = True
                bit = act.value[0][0] if len(act.value) == 1 else 0
                out.append(Output("decision", bit))
        return out


#: Placeholder for an input that never arrived; validated payloads are
#: required to be non-empty, so the empty string cannot collide.
ABSENT = b""


class ValidatedEngine:
    """Validated consensus: disseminate inputs, agree on the collected
    vector, decide the first entry the predicate accepts."""

    def __init__(
        self,
        n: int,
        f: int,
        delta_cap,
        party: int,
        scheme: Scheme,
        validator: Optional[Callable[[bytes], bool]] = None,
        instance: tuple = ("validated",),
    ):
        self.n = n
        self.instance = instance
        self.party = party
        self.validator = validator or (lambda payload: len(payload) > 0)
        self.inner = SpcEngine(SpcConfig(n, f, n, delta_cap, instance + ("spc",)), party, scheme)
        self.delta_cap = delta_cap
        self.buffer: Dict[int, bytes] = {}
        self.started = False
        self.decided = False

    def on_input(self, payload: bytes) -> list:
        if not self.validator(payload):
            raise ValueError("own input fails the validity predicate")
        msg = ValInput(self.instance, payload)
        actions = [Broadcast(msg), StartTimer(("collect",), 2 * self.delta_cap)]
        actions.extend(self._handle_input_msg(self.party, msg))
        return actions

    def on_timer(self, key: tuple) -> list:
        if key == ("collect",):
            return self._start_spc()
        return self._relay(self.inner.on_timer(key))

    def on_message(self, sender: int, msg) -> list:
        if isinstance(msg, ValInput):
            return self._handle_input_msg(sender, msg)
        return self._relay(self.inner.on_message(sender, msg))

    def _handle_input_msg(self, sender: int, msg: ValInput) -> list:
        if msg.inst != self.instance or not isinstance(msg.payload, bytes):
            return []
        if not self.validator(msg.payload):
            return []
        self.buffer.setdefault(sender, msg.payload)
        if len(self.buffer) == self.n and not self.started:
            return self._start_spc()
        return []

    def _start_spc(self) -> list:
        if self.started:
            return []
        self.started = True
        vec = tuple(self.buffer.get(p, ABSENT) for p in range(self.n))
        return self._relay(self.inner.on_input(vec))

    def _relay(self, actions: list) -> list:
        out: list = []
        for act in actions:
            out.append(act)
            if isinstance(act, Output) and act.kind == "high" and not self.decided:
                self.decided = True
                chosen = None
                for entry in act.value:
                    if entry != ABSENT and self.validator(entry):
                        chosen = entry
                        break
                if chosen is None:
                    out.append(Output("undecided", True))
                else:
                    out.append(Output("decision", chosen))
        return out
