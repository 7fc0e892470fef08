"""Byzantine strategies and schedule controls for the simulator.

Strategies fall into three shapes:

* engine-backed: the Byzantine party runs the honest engine but its
  outgoing messages are rewritten (censor, equivocate, withhold-body,
  doctored-proof injection);
* fully scripted: no engine at all (silent, split-view);
* schedule-only: no Byzantine parties, just delivery-order control
  (delay stretching, random pre-GST fuzzing, round-robin suspension).

Every strategy draws randomness exclusively from the simulation's
seeded generator and signs only with Byzantine keys.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Iterable, Optional, Tuple

from . import crypto, msc, spc
from .crypto import Scheme
from .pc import Vote
from .simnet import Adversary, Time


class Silent(Adversary):
    """Byzantine parties never send anything (they keep no engine)."""

    name = "silent"

    def engine_for(self, party, build):
        return None


class JitteredDelays(Adversary):
    """Random finite link delays pre-GST (the schedule-fuzzing mode).

    Post-GST (or when the policy has no GST) honest links fall back to
    the policy, which caps them; pre-GST every link gets a fractional
    delay drawn from ``[1, stretch]``, randomizing delivery order.
    """

    name = "fuzz"

    def __init__(self, byzantine=(), stretch: int = 6, grain: int = 16, always: bool = True):
        super().__init__(byzantine)
        self.stretch = stretch
        self.grain = grain
        self.always = always

    def pick_delay(self, rng, sender, receiver, t):
        policy = self.sim.policy
        if not self.always and policy.gst is not None and t >= policy.gst:
            return None
        return Fraction(rng.randint(self.grain, self.stretch * self.grain), self.grain)


class Delayer(Adversary):
    """Stretch chosen links by a fixed factor before GST."""

    name = "delayer"

    def __init__(self, links: Iterable[Tuple[int, int]], stretch: int = 8, byzantine=()):
        super().__init__(byzantine)
        self.links = frozenset(links)
        self.stretch = stretch

    def pick_delay(self, rng, sender, receiver, t):
        policy = self.sim.policy
        if policy.gst is not None and t >= policy.gst:
            return None
        if (sender, receiver) in self.links:
            return self.stretch
        return None


class Suspender(Adversary):
    """Round-robin suspension: one (honest) party per round window, the
    leaderless-termination adversary.  Combine with ``byzantine`` for the
    f-1 silent parties variant."""

    name = "suspender"

    def __init__(self, n: int, byzantine=(), round_len: Time = 1):
        super().__init__(byzantine)
        self.round_len = round_len
        self.targets = [p for p in range(n) if p not in self.byzantine]

    def engine_for(self, party, build):
        return None  # byzantine members stay silent

    def suspended_until(self, party, t):
        r = int(t // self.round_len)
        if self.targets[r % len(self.targets)] == party:
            return (r + 1) * self.round_len
        return None


class Censor(Adversary):
    """Engine-backed: reveal selected message kinds to a subset only.

    ``reveal[party]`` is the receiver set that still gets the party's
    proposals (or new-view objects); everyone else is starved.  This is
    the canonical censorship strategy: the starved parties disagree with
    the fed ones at the censor's coordinate, the agreed prefix stops
    there, and the ranking update demotes the censor.
    """

    name = "censor"

    def __init__(
        self,
        reveal: Dict[int, Iterable[int]],
        kinds=(msc.Proposal,),
        from_slot: int = 1,
        lag_victims: Iterable[int] = (),
        lag: Time = 0,
    ):
        super().__init__(reveal.keys())
        self.reveal = {p: frozenset(r) for p, r in reveal.items()}
        self.kinds = tuple(kinds)
        self.from_slot = from_slot
        # Lagging the censor's protocol votes toward the starved parties
        # lets their quorums form from honest votes first, which is what
        # actually shortens the agreed prefix and triggers the demotion.
        self.lag_victims = frozenset(lag_victims)
        self.lag = lag

    def _applies(self, msg) -> bool:
        if isinstance(msg, self.kinds):
            return getattr(msg, "slot", self.from_slot) >= self.from_slot
        if isinstance(msg, msc.SlotMsg) and isinstance(msg.inner, self.kinds):
            return msg.slot >= self.from_slot
        return False

    def on_send(self, party, msg, receivers):
        if self._applies(msg):
            allowed = self.reveal[party]
            return [(dest, msg, None) for dest in receivers if dest in allowed]
        return [
            (dest, msg, self.lag if self.lag and dest in self.lag_victims else None)
            for dest in receivers
        ]


class Equivocate(Adversary):
    """Engine-backed: send different proposal payloads to the two halves
    of the receiver set (multi-slot), or different round-1 votes (prefix
    consensus), re-signed with the Byzantine party's own key."""

    name = "equivocate"

    def __init__(self, byzantine, scheme: Scheme, split=None, lag_victims: Iterable[int] = (), lag: Time = 0):
        super().__init__(byzantine)
        self.ring = scheme.restricted(self.byzantine)
        self.split = split  # receivers -> (groupA, groupB)
        self.lag_victims = frozenset(lag_victims)
        self.lag = lag

    def _groups(self, receivers):
        if self.split is not None:
            return self.split(receivers)
        half = len(receivers) // 2
        return receivers[:half], receivers[half:]

    def on_send(self, party, msg, receivers):
        alt = self._variant(party, msg)
        if alt is None:
            return [
                (dest, msg, self.lag if self.lag and dest in self.lag_victims else None)
                for dest in receivers
            ]
        group_a, group_b = self._groups(receivers)
        return [(dest, msg, None) for dest in group_a] + [(dest, alt, None) for dest in group_b]

    def _variant(self, party, msg):
        if isinstance(msg, msc.Proposal):
            return msc.Proposal(msg.inst, msg.slot, msg.payload + b"/alt")
        vote = msg
        wrapped = None
        if isinstance(msg, (msc.SlotMsg, spc.VpcMsg)):
            return None  # nested equivocation handled at the proposal layer
        if isinstance(vote, Vote) and vote.round == 1 and len(vote.value) > 0:
            flipped = vote.value[:-1] + (vote.value[-1] + b"/alt",)
            sig = self.ring.sign_vector(party, crypto.VOTE1, vote.inst, flipped)
            return Vote(vote.inst, 1, party, flipped, sig)
        return wrapped


class SplitView(Adversary):
    """Scripted strong-consensus attack: the Byzantine party withholds
    its own view-entry object, then relays two different valid
    certificates to two victims and nothing to the rest.  With the
    Byzantine party ranked first, the victims' instance inputs conflict
    at position one, the view agrees on the empty prefix, and the
    protocol advances by skip certificates instead."""

    name = "split-view"

    def __init__(self, byzantine, view: int = 2, targets: Optional[Tuple[int, int]] = None):
        super().__init__(byzantine)
        self.view = view
        self.targets = targets
        self._seen: Dict[int, list] = {p: [] for p in self.byzantine}
        self._done: set = set()

    def engine_for(self, party, build):
        return None

    def on_deliver(self, party, sender, msg):
        nv = msg
        if isinstance(msg, msc.SlotMsg):
            nv = msg.inner
        if not isinstance(nv, spc.NewView) or nv.view != self.view or party in self._done:
            return False
        seen = self._seen[party]
        if all(prior.cert != nv.cert for prior in seen):
            seen.append(nv)
        if len(seen) >= 2:
            self._done.add(party)
            honest = [p for p in range(self.sim.n) if p not in self.byzantine]
            t1, t2 = self.targets or (honest[0], honest[1])
            first, second = seen[0], seen[1]
            if isinstance(msg, msc.SlotMsg):
                first = msc.SlotMsg(msg.inst, msg.slot, first)
                second = msc.SlotMsg(msg.inst, msg.slot, second)
            self.sim.byz_send(party, t1, first)
            self.sim.byz_send(party, t2, second)
        return False


class WithholdBody(Adversary):
    """Engine-backed: view-entry objects (and slot proposals) go to a
    subset only, and incoming fetch requests are ignored, forcing honest
    parties onto the pull-based fetch path against honest holders."""

    name = "withhold-body"

    def __init__(self, reveal: Dict[int, Iterable[int]]):
        super().__init__(reveal.keys())
        self.reveal = {p: frozenset(r) for p, r in reveal.items()}

    def _withheld(self, msg) -> bool:
        inner = msg.inner if isinstance(msg, msc.SlotMsg) else msg
        return isinstance(inner, (spc.NewView, msc.Proposal))

    def on_send(self, party, msg, receivers):
        if self._withheld(msg):
            allowed = self.reveal[party]
            return [(dest, msg, None) for dest in receivers if dest in allowed]
        return [(dest, msg, None) for dest in receivers]

    def on_deliver(self, party, sender, msg):
        inner = msg.inner if isinstance(msg, msc.SlotMsg) else msg
        if isinstance(inner, spc.FetchReq):
            return False
        return True


class DoctoredProofs(Adversary):
    """Engine-backed: behaves honestly, additionally floods honest
    parties with corrupted commit/skip evidence -- wrong values under a
    valid proof, proofs with a flipped signature byte, and swapped
    low/high claims.  Honest predicates must reject every one."""

    name = "doctored-proofs"

    def __init__(self, byzantine, limit: int = 4):
        super().__init__(byzantine)
        self.limit = limit
        self.injected = 0

    def _corrupt_qc(self, proof):
        from .pc import QC

        victim = proof.votes[0]
        bad_sig = crypto.Signature(victim.sig.signer, bytes([victim.sig.blob[0] ^ 1]) + victim.sig.blob[1:])
        forged = Vote(victim.inst, victim.round, victim.sender, victim.value, bad_sig, victim.qcs)
        return QC(proof.round, (forged,) + proof.votes[1:])

    def on_deliver(self, party, sender, msg):
        inner = msg.inner if isinstance(msg, msc.SlotMsg) else msg
        if isinstance(inner, spc.NewCommit) and self.injected < self.limit:
            self.injected += 1
            wrong_value = spc.NewCommit(inner.inst, inner.view, inner.value + (b"forged",), inner.proof)
            bad_proof = spc.NewCommit(inner.inst, inner.view, inner.value, self._corrupt_qc(inner.proof))
            for doctored in (wrong_value, bad_proof):
                out = doctored
                if isinstance(msg, msc.SlotMsg):
                    out = msc.SlotMsg(msg.inst, msg.slot, doctored)
                for dest in self.sim.honest:
                    self.sim.byz_send(party, dest, out)
        return True


class Composite(Adversary):
    """Schedule control plus Byzantine behaviour: jitter from one
    strategy, message control from another."""

    name = "composite"

    def __init__(self, behaviour: Adversary, jitter: Optional[JitteredDelays] = None):
        super().__init__(behaviour.byzantine)
        self.behaviour = behaviour
        self.jitter = jitter

    def attach(self, sim):
        super().attach(sim)
        self.behaviour.attach(sim)
        if self.jitter is not None:
            self.jitter.attach(sim)

    def engine_for(self, party, build):
        return self.behaviour.engine_for(party, build)

    def on_input(self, party, value):
        return self.behaviour.on_input(party, value)

    def on_send(self, party, msg, receivers):
        return self.behaviour.on_send(party, msg, receivers)

    def on_deliver(self, party, sender, msg):
        return self.behaviour.on_deliver(party, sender, msg)

    def pick_delay(self, rng, sender, receiver, t):
        if self.jitter is not None:
            return self.jitter.pick_delay(rng, sender, receiver, t)
        return self.behaviour.pick_delay(rng, sender, receiver, t)

    def suspended_until(self, party, t):
        return self.behaviour.suspended_until(party, t)
