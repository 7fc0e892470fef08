"""Prefix-consensus voting engines.

Three deterministic message-driven variants share one chassis:

* ``THREE_ROUND`` -- the asynchronous baseline: three all-to-all voting
  rounds; the third quorum certifies a (low, high) output pair.
* ``OPTIMISTIC`` -- four rounds with an optimistic output after the
  second quorum and an early high output when round-3 votes agree.
* ``FAST_5F1`` -- two rounds under the stronger ``n >= 5f+1`` resilience.

Every round-``r`` quorum is the first ``n-f`` verified votes to arrive;
the quorum certificate (the plain vote set) both drives the next round
and serves as the publicly checkable proof for the verification
predicates at the bottom of this module.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from . import crypto
from .actions import Broadcast, Output
from .crypto import Scheme, Signature
from .prefixes import Vector, is_prefix, longest_supported_prefix, mce, mcp


class Variant(enum.Enum):
    THREE_ROUND = "pc3"
    OPTIMISTIC = "pc_opt"
    FAST_5F1 = "pc_5f1"


ROUNDS = {Variant.THREE_ROUND: 3, Variant.OPTIMISTIC: 4, Variant.FAST_5F1: 2}

VOTE_KIND = {1: crypto.VOTE1, 2: crypto.VOTE2, 3: crypto.VOTE3, 4: crypto.VOTE4}

# Embedded-certificate arity per (variant, round).
_QC_ARITY = {
    Variant.THREE_ROUND: {1: 0, 2: 1, 3: 1},
    Variant.OPTIMISTIC: {1: 0, 2: 1, 3: 2, 4: 1},
    Variant.FAST_5F1: {1: 0, 2: 1},
}


class ProtocolViolation(Exception):
    """A certified vote set broke quorum intersection; the instance is unsound."""


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PcConfig:
    n: int
    f: int
    L: int
    variant: Variant
    instance: tuple = ("pc",)

    def __post_init__(self):
        if self.f < 0 or self.n <= 0 or self.L <= 0:
            raise ConfigError("n, L must be positive and f non-negative")
        if self.variant is Variant.FAST_5F1:
            if self.n < 5 * self.f + 1:
                raise ConfigError(f"{self.variant.value} requires n >= 5f+1, got n={self.n} f={self.f}")
        elif self.n < 3 * self.f + 1:
            raise ConfigError(f"{self.variant.value} requires n >= 3f+1, got n={self.n} f={self.f}")

    @property
    def quorum(self) -> int:
        return self.n - self.f

    @property
    def support(self) -> int:
        """Vote count that pins a round-1 certified prefix."""
        if self.variant is Variant.FAST_5F1:
            return self.n - 2 * self.f
        return self.f + 1

    def rounds(self) -> int:
        return ROUNDS[self.variant]


@dataclass(frozen=True)
class Vote:
    inst: tuple
    round: int
    sender: int
    value: Vector
    sig: Signature
    qcs: tuple = ()


@dataclass(frozen=True)
class QC:
    round: int
    votes: Tuple[Vote, ...]

    def values(self) -> Tuple[Vector, ...]:
        return tuple(v.value for v in self.votes)

    def senders(self) -> Tuple[int, ...]:
        return tuple(v.sender for v in self.votes)


def _values(votes) -> List[Vector]:
    if isinstance(votes, QC):
        return list(votes.values())
    out = []
    for item in votes:
        out.append(item.value if isinstance(item, Vote) else tuple(item))
    return out


def _mce_or_fault(values, where: str) -> Vector:
    ext = mce(values)
    if ext is None:
        raise ProtocolViolation(f"conflicting certified prefixes in {where}; quorum intersection broken")
    return ext


def qc1_certify(votes, cfg: PcConfig):
    """Round-1 certification.

    THREE_ROUND / FAST_5F1 return the deepest prefix with the variant's
    support threshold; OPTIMISTIC additionally returns the common prefix
    of the whole quorum.
    """
    values = _values(votes)
    supported = longest_supported_prefix(values, cfg.support)
    if cfg.variant is Variant.OPTIMISTIC:
        return supported, mcp(values)
    return supported


def qc2_certify(votes, cfg: PcConfig):
    """Round-2 certification: mcp for THREE_ROUND, (mcp, mce) pairs for
    the variants whose round-2 values are guaranteed mutually consistent."""
    values = _values(votes)
    if cfg.variant is Variant.THREE_ROUND:
        return mcp(values)
    return mcp(values), _mce_or_fault(values, "qc2")


def combined_certify(qc1_votes, qc2_votes, cfg: PcConfig) -> Vector:
    """OPTIMISTIC round-3 vote value from a party's own first two quorums."""
    supported, _ = qc1_certify(qc1_votes, cfg)
    _, extension = qc2_certify(qc2_votes, cfg)
    if is_prefix(extension, supported):
        return supported
    return extension


def qc3_certify(votes, cfg: PcConfig):
    values = _values(votes)
    if cfg.variant is Variant.THREE_ROUND:
        return mcp(values), _mce_or_fault(values, "qc3")
    if cfg.variant is Variant.OPTIMISTIC:
        return mcp(values)
    raise ConfigError("no round 3 in this variant")


def qc4_certify(votes, cfg: PcConfig):
    if cfg.variant is not Variant.OPTIMISTIC:
        raise ConfigError("no round 4 in this variant")
    values = _values(votes)
    return mcp(values), _mce_or_fault(values, "qc4")


# ---------------------------------------------------------------------------
# Verification


def _expected_vote_value(vote: Vote, cfg: PcConfig) -> Optional[Vector]:
    """Recertify the carried quorum certificates; None means structurally wrong."""
    var, r = cfg.variant, vote.round
    if r == 2:
        (qc1,) = vote.qcs
        certified = qc1_certify(qc1, cfg)
        return certified[1] if var is Variant.OPTIMISTIC else certified
    if r == 3 and var is Variant.THREE_ROUND:
        (qc2,) = vote.qcs
        return qc2_certify(qc2, cfg)
    if r == 3 and var is Variant.OPTIMISTIC:
        qc1, qc2 = vote.qcs
        return combined_certify(qc1, qc2, cfg)
    if r == 4:
        (qc3,) = vote.qcs
        return qc3_certify(qc3, cfg)
    return None


def verify_vote(vote: Vote, cfg: PcConfig, scheme: Scheme, memo: Optional[dict] = None) -> bool:
    if memo is None:
        memo = {}
    key = id(vote)
    hit = memo.get(key)
    if hit is not None and hit[0] is vote:
        return hit[1]
    ok = _verify_vote_inner(vote, cfg, scheme, memo)
    memo[key] = (vote, ok)
    return ok


def _verify_vote_inner(vote: Vote, cfg: PcConfig, scheme: Scheme, memo: dict) -> bool:
    arity = _QC_ARITY[cfg.variant].get(vote.round)
    if arity is None or vote.inst != cfg.instance:
        return False
    if len(vote.qcs) != arity:
        return False
    if not isinstance(vote.value, tuple) or len(vote.value) > cfg.L:
        return False
    if not scheme.verify_vector(vote.sender, VOTE_KIND[vote.round], cfg.instance, vote.value, vote.sig):
        return False
    expected_rounds = (1, 2) if (cfg.variant is Variant.OPTIMISTIC and vote.round == 3) else (vote.round - 1,) * arity
    for qc, want in zip(vote.qcs, expected_rounds):
        if not isinstance(qc, QC) or qc.round != want:
            return False
        if not verify_qc(qc, cfg, scheme, memo):
            return False
    if vote.round > 1:
        try:
            if _expected_vote_value(vote, cfg) != vote.value:
                return False
        except ProtocolViolation:
            return False
    return True


def verify_qc(qc: QC, cfg: PcConfig, scheme: Scheme, memo: Optional[dict] = None) -> bool:
    if memo is None:
        memo = {}
    key = id(qc)
    hit = memo.get(key)
    if hit is not None and hit[0] is qc:
        return hit[1]
    ok = _verify_qc_inner(qc, cfg, scheme, memo)
    memo[key] = (qc, ok)
    return ok


def _verify_qc_inner(qc: QC, cfg: PcConfig, scheme: Scheme, memo: dict) -> bool:
    if len(qc.votes) != cfg.quorum:
        return False
    senders = qc.senders()
    if len(set(senders)) != len(senders):
        return False
    for vote in qc.votes:
        if vote.round != qc.round or not verify_vote(vote, cfg, scheme, memo):
            return False
    return True


def predicate_low(value: Vector, proof, cfg: PcConfig, scheme: Scheme, memo: Optional[dict] = None) -> bool:
    """Public predicate: ``proof`` certifies ``value`` as a safe-to-commit low."""
    if not isinstance(proof, QC) or not verify_qc(proof, cfg, scheme, memo):
        return False
    try:
        if cfg.variant is Variant.THREE_ROUND:
            return proof.round == 3 and qc3_certify(proof, cfg)[0] == value
        if cfg.variant is Variant.FAST_5F1:
            return proof.round == 2 and qc2_certify(proof, cfg)[0] == value
        if proof.round == 2:
            early, _ = qc2_certify(proof, cfg)
            return len(early) == cfg.L and early == value
        if proof.round == 4:
            return qc4_certify(proof, cfg)[0] == value
    except ProtocolViolation:
        return False
    return False


def predicate_high(value: Vector, proof, cfg: PcConfig, scheme: Scheme, memo: Optional[dict] = None) -> bool:
    """Public predicate: ``proof`` certifies ``value`` as a safe-to-extend high."""
    if not isinstance(proof, QC) or not verify_qc(proof, cfg, scheme, memo):
        return False
    try:
        if cfg.variant is Variant.THREE_ROUND:
            return proof.round == 3 and qc3_certify(proof, cfg)[1] == value
        if cfg.variant is Variant.FAST_5F1:
            return proof.round == 2 and qc2_certify(proof, cfg)[1] == value
        if proof.round == 2:
            early, _ = qc2_certify(proof, cfg)
            return len(early) == cfg.L and early == value
        if proof.round == 3:
            ext = mce(proof.values())
            return ext is not None and ext == value
        if proof.round == 4:
            return qc4_certify(proof, cfg)[1] == value
    except ProtocolViolation:
        return False
    return False


# ---------------------------------------------------------------------------
# Engine


class PcEngine:
    """One party's deterministic reactor for a single PC instance.

    Events arrive one at a time (an input, or a peer's vote); the engine
    returns broadcast/output actions.  A party's own broadcast is applied
    locally at send time and never traverses the network.
    """

    def __init__(self, cfg: PcConfig, party: int, scheme: Scheme, memo: Optional[dict] = None):
        self.cfg = cfg
        self.party = party
        self.scheme = scheme
        self.votes: Dict[int, Dict[int, Vote]] = {r: {} for r in range(1, cfg.rounds() + 1)}
        self.closed: Dict[int, bool] = {r: False for r in range(1, cfg.rounds() + 1)}
        self.own_qcs: Dict[int, QC] = {}
        self.outputs: Dict[str, Tuple[Vector, Optional[QC]]] = {}
        self.input_value: Optional[Vector] = None
        self.dropped = 0
        self._stalled_qc2: Optional[QC] = None
        self._memo = memo if memo is not None else {}

    # -- event entry points

    def on_input(self, value: Vector) -> list:
        assert self.input_value is None, "duplicate input"
        value = tuple(value)
        if len(value) != self.cfg.L:
            raise ConfigError(f"input length {len(value)} != L={self.cfg.L}")
        self.input_value = value
        sig = self.scheme.sign_vector(self.party, crypto.VOTE1, self.cfg.instance, value)
        vote = Vote(self.cfg.instance, 1, self.party, value, sig)
        return self._broadcast_and_record(vote)

    def on_message(self, sender: int, msg) -> list:
        if not isinstance(msg, Vote) or msg.sender != sender:
            self.dropped += 1
            return []
        if not verify_vote(msg, self.cfg, self.scheme, self._memo):
            self.dropped += 1
            return []
        return self._record(msg)

    # -- internals

    def _broadcast_and_record(self, vote: Vote) -> list:
        actions = [Broadcast(vote)]
        actions.extend(self._record(vote))
        return actions

    def _record(self, vote: Vote) -> list:
        r = vote.round
        bucket = self.votes[r]
        if self.closed[r] or vote.sender in bucket:
            return []
        bucket[vote.sender] = vote
        if len(bucket) < self.cfg.quorum:
            return []
        self.closed[r] = True
        qc = QC(r, tuple(bucket.values()))
        self.own_qcs[r] = qc
        return self._on_quorum(r, qc)

    def _on_quorum(self, r: int, qc: QC) -> list:
        var = self.cfg.variant
        if var is Variant.THREE_ROUND:
            if r == 1:
                return self._vote(2, qc1_certify(qc, self.cfg), (qc,))
            if r == 2:
                return self._vote(3, qc2_certify(qc, self.cfg), (qc,))
            low, high = qc3_certify(qc, self.cfg)
            return self._output("low", low, qc) + self._output("high", high, qc)
        if var is Variant.FAST_5F1:
            if r == 1:
                return self._vote(2, qc1_certify(qc, self.cfg), (qc,))
            low, high = qc2_certify(qc, self.cfg)
            return self._output("low", low, qc) + self._output("high", high, qc)
        # OPTIMISTIC
        if r == 1:
            _, common = qc1_certify(qc, self.cfg)
            actions = self._vote(2, common, (qc,))
            if self._stalled_qc2 is not None:
                stash, self._stalled_qc2 = self._stalled_qc2, None
                actions += self._merged_vote3(stash)
            return actions
        if r == 2:
            early, _ = qc2_certify(qc, self.cfg)
            actions = self._output("opt", early, qc)
            if len(early) == self.cfg.L:
                actions += self._output("low", early, qc)
                actions += self._output("high", early, qc)
            if 1 in self.own_qcs:
                return actions + self._merged_vote3(qc)
            # Round-2 quorum outran our own round-1 quorum (possible under
            # asynchrony); the round-3 vote needs our first certificate,
            # so it waits for it.
            self._stalled_qc2 = qc
            return actions
        if r == 3:
            actions = []
            if "high" not in self.outputs:
                ext = mce(qc.values())
                if ext is not None:
                    actions += self._output("high", ext, qc)
            return actions + self._vote(4, qc3_certify(qc, self.cfg), (qc,))
        low, high = qc4_certify(qc, self.cfg)
        actions = []
        if "low" not in self.outputs:
            actions += self._output("low", low, qc)
        if "high" not in self.outputs:
            actions += self._output("high", high, qc)
        return actions

    def _merged_vote3(self, qc2: QC) -> list:
        merged = combined_certify(self.own_qcs[1], qc2, self.cfg)
        return self._vote(3, merged, (self.own_qcs[1], qc2))

    def _vote(self, r: int, value: Vector, qcs: tuple) -> list:
        sig = self.scheme.sign_vector(self.party, VOTE_KIND[r], self.cfg.instance, value)
        return self._broadcast_and_record(Vote(self.cfg.instance, r, self.party, value, sig, qcs))

    def _output(self, kind: str, value: Vector, proof: QC) -> list:
        assert kind not in self.outputs, f"duplicate {kind} output"
        self.outputs[kind] = (value, proof)
        return [Output(kind, value, proof)]

    @property
    def done(self) -> bool:
        return "low" in self.outputs and "high" in self.outputs
