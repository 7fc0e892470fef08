"""Leaderless strong agreement over verifiable prefix-consensus views.

View 1 runs a verifiable prefix-consensus instance on the real input and
its low output commits immediately.  Every later view runs an instance
over a ranked vector of proposal-object digests, where a proposal object
is a view-entry certificate:

* a direct certificate carries the previous view's verifiable high
  output (which must itself have a parent);
* a skip certificate carries ``f+1`` signed statements that their
  senders know no parented high past some older view, plus that older
  view's high as the parent.

Committing any parented low walks the parent chain back to view 1 and
emits the view-1 high as the agreed output.  Ranks shift cyclically from
view 3 on, so after GST some view puts an honest party first and the
chain terminates even under one suspension per round.

Proposal objects are gossiped inside new-view messages; a pull-based
fetch pair covers preimages a party never saw (Byzantine senders may
reveal objects to a subset only).  Computations that hit a missing
preimage park until the fetch resolves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from . import crypto, encoding, wire
from .actions import Broadcast, Output, Send, StartTimer
from .crypto import AggregateSignature, Scheme, Signature
from .pc import PcConfig, PcEngine, QC, Variant, predicate_high, predicate_low
from .prefixes import Vector

HBOT = crypto.HBOT


def shift(rank: tuple) -> tuple:
    """One cyclic left rotation of a ranking."""
    return rank[1:] + rank[:1]


def rank_for_view(rank0: tuple, view: int) -> tuple:
    """View 2 reuses the input ranking; later views shift once per view."""
    if view <= 2:
        return tuple(rank0)
    r = tuple(rank0)
    for _ in range(view - 2):
        r = shift(r)
    return r


@dataclass(frozen=True)
class SpcConfig:
    n: int
    f: int
    L: int  # view-1 input length
    delta_cap: int  # the known post-GST bound; view timers run 2x this
    instance: tuple = ("spc",)
    rank0: tuple = ()

    def __post_init__(self):
        if self.n < 3 * self.f + 1:
            raise ValueError("requires n >= 3f+1")
        if self.rank0 == ():
            object.__setattr__(self, "rank0", tuple(range(self.n)))
        if sorted(self.rank0) != list(range(self.n)):
            raise ValueError("rank0 must be a permutation of the parties")

    def vpc_cfg(self, view: int) -> PcConfig:
        length = self.L if view == 1 else self.n
        return PcConfig(self.n, self.f, length, Variant.THREE_ROUND, self.instance + ("view", view))


@dataclass(frozen=True)
class DirectCert:
    prev_view: int
    value: Vector
    proof: QC


@dataclass(frozen=True)
class SkipCert:
    prev_view: int  # the view whose emptiness the statements attest
    ref_view: int  # newest parented high known to the signers
    ref_value: Vector
    ref_proof: object
    agg: AggregateSignature


@dataclass(frozen=True)
class NewView:
    inst: tuple
    view: int
    cert: object


@dataclass(frozen=True)
class EmptyView:
    inst: tuple
    view: int
    ref_view: int
    ref_value: Vector
    ref_proof: object
    sig: Signature


@dataclass(frozen=True)
class NewCommit:
    inst: tuple
    view: int
    value: Vector
    proof: QC


@dataclass(frozen=True)
class VpcMsg:
    inst: tuple
    view: int
    vote: object


@dataclass(frozen=True)
class FetchReq:
    inst: tuple
    digest: bytes


@dataclass(frozen=True)
class FetchResp:
    inst: tuple
    digest: bytes
    obj: object


for _tag, _cls in ((30, DirectCert), (31, SkipCert), (32, NewView), (33, EmptyView),
                   (34, NewCommit), (35, VpcMsg), (36, FetchReq), (37, FetchResp)):
    wire.register(_tag)(_cls)


def _uint_bytes(value: int) -> bytes:
    out: list = []
    encoding.write_uint(out, value)
    return b"".join(out)


def skip_statement(view: int, ref_view: int) -> Vector:
    """Signed payload of one empty-view report."""
    return (_uint_bytes(view), _uint_bytes(ref_view))


_digest_memo: Dict[int, tuple] = {}


def proposal_digest(nv: NewView) -> bytes:
    """Content digest of a view-entry object (memoized by identity; the
    objects are immutable and shared by reference inside one process)."""
    key = id(nv)
    hit = _digest_memo.get(key)
    if hit is not None and hit[0] is nv:
        return hit[1]
    digest = wire.hash_obj(nv)
    if len(_digest_memo) > 200_000:
        _digest_memo.clear()
    _digest_memo[key] = (nv, digest)
    return digest


class _Missing(Exception):
    def __init__(self, digest: bytes):
        self.digest = digest


class SpcEngine:
    """One party's reactor for a strong-prefix-consensus instance."""

    def __init__(
        self,
        cfg: SpcConfig,
        party: int,
        scheme: Scheme,
        memo: Optional[dict] = None,
        store: Optional[dict] = None,
    ):
        self.cfg = cfg
        self.party = party
        self.scheme = scheme
        self.view = 1
        self.vpc: Dict[int, PcEngine] = {}
        self.vpc_outputs: Dict[int, Dict[str, tuple]] = {}
        self.proposals: Dict[int, Dict[int, NewView]] = {}
        self.empty_votes: Dict[int, Dict[int, EmptyView]] = {}
        self.best_high: Tuple[int, Vector, object] = (0, (), None)
        self.store: Dict[bytes, object] = store if store is not None else {}
        self.pending: List[Tuple[bytes, tuple]] = []
        self.fetching: set = set()
        self.ran_vpc: set = set()
        self.emitted_empty: set = set()
        self.skip_built: set = set()
        self.commit_broadcast: set = set()
        self.view_commits: Dict[int, str] = {}
        self.built_skips: List[SkipCert] = []
        self.outputs: Dict[str, tuple] = {}
        self.own_dropped = 0
        self._memo = memo if memo is not None else {}

    @property
    def dropped(self) -> int:
        return self.own_dropped + sum(e.dropped for e in self.vpc.values())

    # ------------------------------------------------------------------
    # event entry points

    def on_input(self, value: Vector) -> list:
        return self._run_vpc_input(1, tuple(value))

    def on_timer(self, key: tuple) -> list:
        if key[0] != "view" or self._done_high():
            return []
        view = key[1]
        if view not in self.ran_vpc:
            return self._run_vpc(view)
        return []

    def on_message(self, sender: int, msg) -> list:
        if isinstance(msg, FetchReq):
            return self._serve_fetch(sender, msg)
        if isinstance(msg, FetchResp):
            return self._take_fetch(msg)
        if self._done_high():
            # Late low: view-1 traffic still matters until the low lands.
            if "low" in self.outputs:
                return []
            if isinstance(msg, VpcMsg) and msg.view == 1:
                return self._route_vpc(msg)
            if isinstance(msg, NewCommit) and msg.view == 1:
                return self._handle_new_commit(msg)
            return []
        if isinstance(msg, VpcMsg):
            return self._route_vpc(msg)
        if isinstance(msg, NewView):
            return self._handle_new_view(sender, msg)
        if isinstance(msg, EmptyView):
            return self._handle_empty_view(sender, msg)
        if isinstance(msg, NewCommit):
            return self._handle_new_commit(msg)
        self.own_dropped += 1
        return []

    # ------------------------------------------------------------------
    # verifiable-PC plumbing

    def _vpc_engine(self, view: int) -> PcEngine:
        eng = self.vpc.get(view)
        if eng is None:
            eng = PcEngine(self.cfg.vpc_cfg(view), self.party, self.scheme, self._memo)
            self.vpc[view] = eng
        return eng

    def _route_vpc(self, msg: VpcMsg) -> list:
        if not isinstance(msg.view, int) or msg.view < 1 or msg.inst != self.cfg.instance:
            self.own_dropped += 1
            return []
        inner = self._vpc_engine(msg.view)
        return self._wrap_vpc(msg.view, inner.on_message(getattr(msg.vote, "sender", -1), msg.vote))

    def _run_vpc_input(self, view: int, value: Vector) -> list:
        self.ran_vpc.add(view)
        inner = self._vpc_engine(view)
        return self._wrap_vpc(view, inner.on_input(value))

    def _wrap_vpc(self, view: int, inner_actions: list) -> list:
        actions: list = []
        for act in inner_actions:
            if isinstance(act, Broadcast):
                actions.append(Broadcast(VpcMsg(self.cfg.instance, view, act.msg)))
            elif isinstance(act, Output):
                actions.extend(self._vpc_output(view, act.kind, act.value, act.proof))
            else:
                raise AssertionError(f"unexpected inner action {act!r}")
        return actions

    def _vpc_output(self, view: int, kind: str, value: Vector, proof) -> list:
        self.vpc_outputs.setdefault(view, {})[kind] = (value, proof)
        if kind == "low":
            if self._done_high() and not (view == 1 and "low" not in self.outputs):
                return []
            nc = NewCommit(self.cfg.instance, view, value, proof)
            self.commit_broadcast.add((view, value))
            return [Broadcast(nc)] + self._handle_new_commit(nc)
        return self._handle_vpc_high(view, value, proof)

    def _handle_vpc_high(self, view: int, value: Vector, proof) -> list:
        """Direct advance when the high has a parent, otherwise an
        empty-view report carrying the newest parented high we know."""
        if self._done_high():
            return []
        try:
            parented = self._has_parent(view, value)
        except _Missing as miss:
            return self._park(miss.digest, ("vpc-high", view, value, proof))
        if parented:
            cert = DirectCert(view, value, proof)
            nv = NewView(self.cfg.instance, view + 1, cert)
            return [Broadcast(nv)] + self._accept_new_view(self.party, nv, relay=False)
        if view in self.emitted_empty:
            return []
        self.emitted_empty.add(view)
        ref_view, ref_value, ref_proof = self.best_high
        sig = self.scheme.sign_vector(
            self.party, crypto.EMPTY_VIEW, self.cfg.instance, skip_statement(view, ref_view)
        )
        ev = EmptyView(self.cfg.instance, view, ref_view, ref_value, ref_proof, sig)
        return [Broadcast(ev)] + self._handle_empty_view(self.party, ev)

    def _run_vpc(self, view: int) -> list:
        rank = rank_for_view(self.cfg.rank0, view)
        buffer = self.proposals.get(view, {})
        vec = tuple(proposal_digest(buffer[p]) if p in buffer else HBOT for p in rank)
        return self._run_vpc_input(view, vec)

    # ------------------------------------------------------------------
    # certificates and parents

    def _predicate_high(self, view: int, value, proof) -> bool:
        if not isinstance(view, int) or view < 1:
            return False
        return predicate_high(value, proof, self.cfg.vpc_cfg(view), self.scheme, self._memo)

    def _predicate_low(self, view: int, value, proof) -> bool:
        if not isinstance(view, int) or view < 1:
            return False
        return predicate_low(value, proof, self.cfg.vpc_cfg(view), self.scheme, self._memo)

    def _parent_of(self, vector: Vector):
        """Parent (view, value) named by the first non-placeholder entry,
        or None for an empty vector.  Raises _Missing when the preimage
        of that entry is not locally available."""
        for digest in vector:
            if digest == HBOT:
                continue
            obj = self.store.get(digest)
            if obj is None:
                raise _Missing(digest)
            cert = obj.cert if isinstance(obj, NewView) else None
            if isinstance(cert, DirectCert):
                return (cert.prev_view, cert.value)
            if isinstance(cert, SkipCert):
                return (cert.ref_view, cert.ref_value)
            return None  # unrecognized preimage: treat as parentless
        return None

    def _has_parent(self, view: int, value: Vector) -> bool:
        if view == 1:
            return True
        return self._parent_of(value) is not None

    def _valid_cert(self, view: int, cert) -> bool:
        """Exactly the view-entry checks; raises _Missing on fetch needs."""
        if isinstance(cert, DirectCert):
            if cert.prev_view != view - 1 or cert.prev_view < 1:
                return False
            if not self._predicate_high(cert.prev_view, cert.value, cert.proof):
                return False
            return self._has_parent(cert.prev_view, cert.value)
        if isinstance(cert, SkipCert):
            if cert.prev_view != view - 1 or cert.prev_view < 1:
                return False
            agg = cert.agg
            if not isinstance(agg, AggregateSignature):
                return False
            if agg.kind != crypto.EMPTY_VIEW or agg.instance != self.cfg.instance:
                return False
            if len(agg.signers) != self.cfg.f + 1:
                return False
            if not self.scheme.verify_aggregate(agg):
                return False
            reported = []
            for msg in agg.messages:
                if msg[0] != _uint_bytes(cert.prev_view):
                    return False  # a statement names a different view
                ref, _pos = encoding.read_uint(msg[1], 0)
                reported.append(ref)
            if cert.ref_view != max(reported):
                return False
            if not self._predicate_high(cert.ref_view, cert.ref_value, cert.ref_proof):
                return False
            return self._has_parent(cert.ref_view, cert.ref_value)
        return False

    # ------------------------------------------------------------------
    # message handlers

    def _handle_new_view(self, sender: int, nv: NewView) -> list:
        if nv.inst != self.cfg.instance or not isinstance(nv.view, int) or nv.view < 2:
            self.own_dropped += 1
            return []
        try:
            ok = self._valid_cert(nv.view, nv.cert)
        except _Missing as miss:
            return self._park(miss.digest, ("msg", sender, nv))
        if not ok:
            self.own_dropped += 1
            return []
        if nv.view < self.view:
            # Stale view: only the newest-parented-high bookkeeping applies.
            self._update_best(nv.cert)
            return []
        return self._accept_new_view(sender, nv, relay=True)

    def _accept_new_view(self, origin: int, nv: NewView, relay: bool) -> list:
        actions: list = []
        if nv.view > self.view:
            self.view = nv.view
            if relay:
                actions.append(Broadcast(nv))
            actions.append(StartTimer(("view", nv.view), 2 * self.cfg.delta_cap))
            # Entering by relay (or origination) makes this certificate my
            # own proposal object for the view as well.
            self._store_proposal(nv.view, self.party, nv)
        self._update_best(nv.cert)
        self._store_proposal(nv.view, origin, nv)
        if len(self.proposals.get(nv.view, {})) == self.cfg.n and nv.view not in self.ran_vpc:
            actions.extend(self._run_vpc(nv.view))
        return actions

    def _store_proposal(self, view: int, party: int, nv: NewView) -> None:
        bucket = self.proposals.setdefault(view, {})
        if party not in bucket:
            bucket[party] = nv
        self.store.setdefault(proposal_digest(nv), nv)

    def _update_best(self, cert) -> None:
        if isinstance(cert, DirectCert):
            candidate = (cert.prev_view, cert.value, cert.proof)
        elif isinstance(cert, SkipCert):
            candidate = (cert.ref_view, cert.ref_value, cert.ref_proof)
        else:
            return
        if candidate[0] > self.best_high[0]:
            self.best_high = candidate

    def _handle_empty_view(self, sender: int, ev: EmptyView) -> list:
        if ev.inst != self.cfg.instance or not isinstance(ev.view, int):
            self.own_dropped += 1
            return []
        if ev.view < self.view or ev.view <= ev.ref_view:
            self.own_dropped += 1
            return []
        if not self.scheme.verify_vector(
            sender, crypto.EMPTY_VIEW, self.cfg.instance, skip_statement(ev.view, ev.ref_view), ev.sig
        ) or ev.sig.signer != sender:
            self.own_dropped += 1
            return []
        if not self._predicate_high(ev.ref_view, ev.ref_value, ev.ref_proof):
            self.own_dropped += 1
            return []
        try:
            if not self._has_parent(ev.ref_view, ev.ref_value):
                self.own_dropped += 1
                return []
        except _Missing as miss:
            return self._park(miss.digest, ("msg", sender, ev))
        bucket = self.empty_votes.setdefault(ev.view, {})
        if sender in bucket or ev.view in self.skip_built:
            return []
        bucket[sender] = ev
        if len(bucket) < self.cfg.f + 1:
            return []
        self.skip_built.add(ev.view)
        entries = [
            (party, skip_statement(ev.view, vote.ref_view), vote.sig)
            for party, vote in bucket.items()
        ]
        agg = self.scheme.aggregate(crypto.EMPTY_VIEW, self.cfg.instance, entries)
        best = max(bucket.values(), key=lambda vote: vote.ref_view)
        cert = SkipCert(ev.view, best.ref_view, best.ref_value, best.ref_proof, agg)
        self.built_skips.append(cert)
        nv = NewView(self.cfg.instance, ev.view + 1, cert)
        return [Broadcast(nv)] + self._accept_new_view(self.party, nv, relay=False)

    def _handle_new_commit(self, nc: NewCommit) -> list:
        if nc.inst != self.cfg.instance or not isinstance(nc.view, int):
            self.own_dropped += 1
            return []
        if not self._predicate_low(nc.view, nc.value, nc.proof):
            self.own_dropped += 1
            return []
        actions: list = []
        key = (nc.view, nc.value)
        if key not in self.commit_broadcast:
            self.commit_broadcast.add(key)
            actions.append(Broadcast(nc))
        actions.extend(self._commit(nc.view, nc.value))
        return actions

    # ------------------------------------------------------------------
    # committing

    def _commit(self, view: int, value: Vector) -> list:
        while True:
            if view == 1:
                return self._emit_output("low", value)
            try:
                parent = self._parent_of(value)
            except _Missing as miss:
                return self._park(miss.digest, ("commit", view, value))
            self.view_commits.setdefault(view, "non-empty" if parent else "empty")
            if parent is None:
                return []
            pview, pvalue = parent
            if pview == 1:
                return self._emit_output("high", pvalue)
            view, value = pview, pvalue

    def _emit_output(self, kind: str, value: Vector) -> list:
        if kind in self.outputs:
            return []
        self.outputs[kind] = (value, self.view)
        return [Output(kind, value)]

    def _done_high(self) -> bool:
        return "high" in self.outputs

    # ------------------------------------------------------------------
    # fetch machinery

    def _park(self, digest: bytes, task: tuple) -> list:
        self.pending.append((digest, task))
        if digest in self.fetching:
            return []
        self.fetching.add(digest)
        return [Broadcast(FetchReq(self.cfg.instance, digest))]

    def _serve_fetch(self, sender: int, req: FetchReq) -> list:
        if req.inst != self.cfg.instance:
            return []
        obj = self.store.get(req.digest)
        if obj is None:
            return []
        return [Send(sender, FetchResp(self.cfg.instance, req.digest, obj))]

    def _take_fetch(self, resp: FetchResp) -> list:
        if resp.inst != self.cfg.instance:
            return []
        if wire.hash_obj(resp.obj) != resp.digest:
            self.own_dropped += 1
            return []
        self.store.setdefault(resp.digest, resp.obj)
        ready = [task for digest, task in self.pending if digest == resp.digest]
        self.pending = [(d, t) for d, t in self.pending if d != resp.digest]
        actions: list = []
        for task in ready:
            if task[0] == "msg":
                actions.extend(self.on_message(task[1], task[2]))
            elif task[0] == "commit":
                actions.extend(self._commit(task[1], task[2]))
            elif task[0] == "vpc-high":
                actions.extend(self._handle_vpc_high(task[1], task[2], task[3]))
            else:
                raise AssertionError(f"unknown parked task {task[0]}")
        return actions
