"""Multi-slot replication: one strong-prefix-consensus instance per slot.

Each slot broadcasts proposals, orders the received ones by the slot
ranking, and agrees on a prefix of the ranked digest vector.  The next
slot's ranking demotes the first party whose position fell outside the
agreed prefix, so a censoring proposer loses its ability to censor after
at most one slot per Byzantine party.

Slots are strictly sequential: a party starts slot ``s+1`` only after
the slot-``s`` agreement lands.  The low output of a slot commits early;
it is always a prefix of the final slot output, so early commits never
roll back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

from . import crypto, wire
from .actions import Broadcast, Output, Send, StartTimer
from .crypto import Scheme
from .prefixes import Vector
from .spc import FetchReq, FetchResp, SpcConfig, SpcEngine

HBOT = crypto.HBOT


def update_rank(rank: tuple, high: Vector) -> tuple:
    """Demote the first excluded position: identity when the agreed
    vector has full length, otherwise position ``len(high)+1`` moves to
    the end with all other positions preserved."""
    cut = len(high)
    if cut >= len(rank):
        return tuple(rank)
    return tuple(rank[:cut]) + tuple(rank[cut + 1 :]) + (rank[cut],)


@dataclass(frozen=True)
class Proposal:
    inst: tuple
    slot: int
    payload: bytes


@dataclass(frozen=True)
class SlotMsg:
    inst: tuple
    slot: int
    inner: object


for _tag, _cls in ((40, Proposal), (41, SlotMsg)):
    wire.register(_tag)(_cls)


@dataclass(frozen=True)
class MscConfig:
    n: int
    f: int
    delta_cap: int
    instance: tuple = ("msc",)
    rank0: tuple = ()
    slots: int = 1  # how many slots this run plays out

    def __post_init__(self):
        if self.rank0 == ():
            object.__setattr__(self, "rank0", tuple(range(self.n)))

    def spc_cfg(self, slot: int, rank: tuple) -> SpcConfig:
        return SpcConfig(
            self.n, self.f, self.n, self.delta_cap,
            self.instance + ("slot", slot), rank,
        )


def payload_digest(payload: bytes) -> bytes:
    return crypto.hash_bytes(payload)


class MscEngine:
    """One party's reactor across slots.

    ``input_for(slot)`` supplies the per-slot proposal payload;
    ``validator`` is the external-validity predicate applied to received
    proposals (invalid ones are discarded on arrival).
    """

    def __init__(
        self,
        cfg: MscConfig,
        party: int,
        scheme: Scheme,
        input_for: Callable[[int], bytes],
        validator: Optional[Callable[[bytes], bool]] = None,
        memo: Optional[dict] = None,
    ):
        self.cfg = cfg
        self.party = party
        self.scheme = scheme
        self.input_for = input_for
        self.validator = validator
        self.slot = 0
        self.buffers: Dict[int, Dict[int, bytes]] = {}
        self.payloads: Dict[bytes, bytes] = {}
        self.spc: Dict[int, SpcEngine] = {}
        self.ranks: Dict[int, tuple] = {}
        self.ran_spc: set = set()
        self.committed: set = set()
        self.commit_log: List[Tuple[int, int, int, bytes]] = []  # slot, index, origin, digest
        self.slot_outputs: Dict[int, Dict[str, tuple]] = {}
        self.pending: List[Tuple[bytes, tuple]] = []
        self.future_msgs: Dict[int, list] = {}
        self.fetching: set = set()
        self.object_store: Dict[bytes, object] = {}  # shared across slot engines
        self.own_dropped = 0
        self._memo = memo if memo is not None else {}

    @property
    def dropped(self) -> int:
        return self.own_dropped + sum(e.dropped for e in self.spc.values())

    # ------------------------------------------------------------------

    def on_input(self, _value=None) -> list:
        return self._new_slot(1)

    def _new_slot(self, slot: int) -> list:
        if self.cfg.slots and slot > self.cfg.slots:
            return []
        self.slot = slot
        payload = self.input_for(slot)
        prop = Proposal(self.cfg.instance, slot, payload)
        actions = [Broadcast(prop), StartTimer(("slot", slot), 2 * self.cfg.delta_cap)]
        actions.extend(self._handle_proposal(self.party, prop))
        return actions

    def on_timer(self, key: tuple) -> list:
        if key[0] == "slot":
            slot = key[1]
            if slot == self.slot and slot not in self.ran_spc:
                return self._run_spc(slot)
            return []
        if key[0] == "spc":
            slot = key[1]
            engine = self.spc.get(slot)
            if engine is not None:
                return self._wrap_slot(slot, engine.on_timer(key[2:]))
            return []
        return []

    def on_message(self, sender: int, msg) -> list:
        if isinstance(msg, Proposal):
            return self._handle_proposal(sender, msg)
        if isinstance(msg, SlotMsg):
            return self._route_slot(sender, msg)
        self.own_dropped += 1
        return []

    # ------------------------------------------------------------------

    def _handle_proposal(self, sender: int, prop: Proposal) -> list:
        if prop.inst != self.cfg.instance or not isinstance(prop.slot, int):
            self.own_dropped += 1
            return []
        if not isinstance(prop.payload, bytes):
            self.own_dropped += 1
            return []
        if self.validator is not None and not self.validator(prop.payload):
            self.own_dropped += 1
            return []
        digest = payload_digest(prop.payload)
        self.payloads.setdefault(digest, prop.payload)
        actions = self._resolve_pending(digest)
        if prop.slot < self.slot:
            return actions  # past slot: the input vector is long fixed
        bucket = self.buffers.setdefault(prop.slot, {})
        if sender not in bucket:
            bucket[sender] = prop.payload
        if prop.slot == self.slot and prop.slot not in self.ran_spc and len(bucket) == self.cfg.n:
            actions.extend(self._run_spc(prop.slot))
        return actions

    def _rank_for(self, slot: int) -> tuple:
        if slot == 1:
            return tuple(self.cfg.rank0)
        prev = self.ranks.get(slot - 1)
        if prev is None:
            raise AssertionError("slot ranking computed out of order")
        prev_high = self.slot_outputs[slot - 1]["high"][0]
        return update_rank(prev, prev_high)

    def _run_spc(self, slot: int) -> list:
        self.ran_spc.add(slot)
        rank = self._rank_for(slot)
        self.ranks[slot] = rank
        bucket = self.buffers.get(slot, {})
        vec = tuple(payload_digest(bucket[p]) if p in bucket else HBOT for p in rank)
        engine = SpcEngine(
            self.cfg.spc_cfg(slot, rank), self.party, self.scheme, self._memo,
            store=self.object_store,
        )
        self.spc[slot] = engine
        actions = self._wrap_slot(slot, engine.on_input(vec))
        # Slot traffic that raced ahead of our own slot start.
        for sender, msg in self.future_msgs.pop(slot, []):
            actions.extend(self._route_slot(sender, msg))
        return actions

    def _route_slot(self, sender: int, msg: SlotMsg) -> list:
        if msg.inst != self.cfg.instance or not isinstance(msg.slot, int):
            self.own_dropped += 1
            return []
        slot = msg.slot
        if isinstance(msg.inner, FetchReq):
            return self._serve_fetch(sender, slot, msg.inner)
        if isinstance(msg.inner, FetchResp):
            return self._take_fetch(sender, slot, msg.inner)
        engine = self.spc.get(slot)
        if engine is None:
            # A slot engine exists only once RunSPC fires; traffic for the
            # current or a future slot waits for it, anything else is stale.
            if slot < self.slot or (self.cfg.slots and slot > self.cfg.slots):
                return []
            self.future_msgs.setdefault(slot, []).append((sender, msg))
            return []
        return self._wrap_slot(slot, engine.on_message(sender, msg.inner))

    def _serve_fetch(self, sender: int, slot: int, req: FetchReq) -> list:
        payload = self.payloads.get(req.digest)
        if payload is not None:
            resp = FetchResp(req.inst, req.digest, payload)
            return [Send(sender, SlotMsg(self.cfg.instance, slot, resp))]
        engine = self.spc.get(slot)
        if engine is not None:
            return self._wrap_slot(slot, engine.on_message(sender, req))
        return []

    def _take_fetch(self, sender: int, slot: int, resp: FetchResp) -> list:
        """Payload responses land in the payload store; proposal-object
        responses flow into the slot engine."""
        if isinstance(resp.obj, bytes):
            if payload_digest(resp.obj) != resp.digest:
                self.own_dropped += 1
                return []
            self.payloads.setdefault(resp.digest, resp.obj)
            return self._resolve_pending(resp.digest)
        engine = self.spc.get(slot)
        if engine is None:
            return []
        return self._wrap_slot(slot, engine.on_message(sender, resp))

    def _wrap_slot(self, slot: int, inner_actions: list) -> list:
        actions: list = []
        for act in inner_actions:
            if isinstance(act, Broadcast):
                actions.append(Broadcast(SlotMsg(self.cfg.instance, slot, act.msg)))
            elif isinstance(act, Send):
                actions.append(Send(act.dest, SlotMsg(self.cfg.instance, slot, act.msg)))
            elif isinstance(act, StartTimer):
                actions.append(StartTimer(("spc", slot) + act.key, act.delay))
            elif isinstance(act, Output):
                actions.extend(self._slot_output(slot, act.kind, act.value))
            else:
                raise AssertionError(f"unexpected slot action {act!r}")
        return actions

    def _slot_output(self, slot: int, kind: str, value: Vector) -> list:
        self.slot_outputs.setdefault(slot, {})[kind] = (value, None)
        actions = self._commit_vector(slot, value, 0)
        if kind == "high":
            actions.append(Output(f"slot{slot}-high", value))
            if slot == self.slot:
                actions.extend(self._new_slot(slot + 1))
        return actions

    # ------------------------------------------------------------------
    # committing payloads

    def _commit_vector(self, slot: int, vector: Vector, start: int) -> list:
        rank = self.ranks[slot]
        actions: list = []
        for idx in range(start, len(vector)):
            digest = vector[idx]
            if digest == HBOT:
                continue
            payload = self.payloads.get(digest)
            if payload is None:
                # Fetch within the slot's namespace and resume in order.
                self.pending.append((digest, ("commit", slot, vector, idx)))
                if digest not in self.fetching:
                    self.fetching.add(digest)
                    req = FetchReq(self.cfg.instance + ("slot", slot), digest)
                    actions.append(Broadcast(SlotMsg(self.cfg.instance, slot, req)))
                return actions
            if digest not in self.committed:
                self.committed.add(digest)
                self.commit_log.append((slot, idx, rank[idx], digest))
                actions.append(Output(f"commit-{slot}-{idx}", (rank[idx], digest)))
        return actions

    def _resolve_pending(self, digest: bytes) -> list:
        ready = [task for d, task in self.pending if d == digest]
        if not ready:
            return []
        self.pending = [(d, t) for d, t in self.pending if d != digest]
        actions: list = []
        for task in ready:
            if task[0] == "commit":
                actions.extend(self._commit_vector(task[1], task[2], task[3]))
            elif task[0] == "slotmsg":
                actions.extend(self._route_slot(task[1], task[2]))
        return actions

    # ------------------------------------------------------------------

    def committed_for_slot(self, slot: int) -> List[Tuple[int, int, bytes]]:
        """Ordered (index, origin, payload) entries committed for a slot."""
        out = []
        for s, idx, origin, digest in self.commit_log:
            if s == slot:
                out.append((idx, origin, self.payloads[digest]))
        return out

    def export_commit_log(self) -> str:
        """Line-delimited commit records: slot, index, party-of-origin,
        payload digest (hex)."""
        return "\n".join(
            f"{slot}\t{idx}\t{origin}\t{digest.hex()}"
            for slot, idx, origin, digest in self.commit_log
        )
