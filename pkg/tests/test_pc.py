"""Certification functions, voting engines, and verification predicates."""

import itertools
import random

import pytest

from prefixsim import crypto
from prefixsim.crypto import MacScheme
from prefixsim.pc import (
    PcConfig,
    PcEngine,
    QC,
    Variant,
    Vote,
    predicate_high,
    predicate_low,
    qc1_certify,
    qc2_certify,
    qc3_certify,
    verify_qc,
)
from prefixsim.prefixes import is_prefix, mcp
from prefixsim.simnet import DelayPolicy, Simulation

a, b, c, d = b"a", b"b", b"c", b"d"


def cfg3(n=4, f=1, L=4):
    return PcConfig(n, f, L, Variant.THREE_ROUND, ("t", "pc3"))


def test_config_bounds():
    with pytest.raises(ValueError):
        PcConfig(3, 1, 4, Variant.THREE_ROUND)
    with pytest.raises(ValueError):
        PcConfig(5, 1, 4, Variant.FAST_5F1)
    assert PcConfig(6, 1, 4, Variant.FAST_5F1).quorum == 5


def test_qc1_certify_examples():
    cfg = cfg3()
    assert qc1_certify([(a, b), (a, b), (a, c)], cfg) == (a, b)
    opt = PcConfig(4, 1, 4, Variant.OPTIMISTIC)
    assert qc1_certify([(a, b), (a, b), (a, c)], opt) == ((a, b), (a,))
    fast = PcConfig(6, 1, 4, Variant.FAST_5F1)
    votes = [(a, b)] * 4 + [(a, c)]
    assert qc1_certify(votes, fast) == (a, b)
    # Brute-force over size-4 subsets agrees.
    best = ()
    for sub in itertools.combinations(votes, 4):
        cand = mcp(sub)
        if len(cand) > len(best):
            best = cand
    assert best == (a, b)


def test_qc2_certify_examples():
    fast = PcConfig(6, 1, 4, Variant.FAST_5F1)
    assert qc2_certify([(a,), (a, b), (a, b)], fast) == ((a,), (a, b))
    cfg = cfg3()
    assert qc2_certify([(a, b)] * 3, cfg) == (a, b)
    opt = PcConfig(4, 1, 1, Variant.OPTIMISTIC)
    assert qc2_certify([(a,), (a,)], opt) == ((a,), (a,))


def test_qc3_certify_examples():
    cfg = cfg3()
    assert qc3_certify([(a,), (a, b), (a, b)], cfg) == ((a,), (a, b))
    opt = PcConfig(4, 1, 4, Variant.OPTIMISTIC)
    assert qc3_certify([(a, b), (a, c), (a,)], opt) == ((a,),)[0]


# ---------------------------------------------------------------------------
# Engine runs through the simulator


def run_pc(variant, n, f, L, inputs, seed=0, policy=None):
    cfg = PcConfig(n, f, L, variant, ("t", variant.value))
    scheme = MacScheme(n)
    sim = Simulation(
        n,
        lambda p: PcEngine(cfg, p, scheme),
        policy=policy or DelayPolicy.synchronized(1),
        seed=seed,
    )
    for party, vec in enumerate(inputs):
        sim.schedule_input(party, tuple(vec), at=0)
    metrics = sim.run()
    return sim, metrics


def test_three_round_fault_free_timing():
    inputs = [(a, b, c, d)] * 4
    sim, metrics = run_pc(Variant.THREE_ROUND, 4, 1, 4, inputs)
    for p in range(4):
        assert metrics.output_time(p, "low") == 3
        assert metrics.output_time(p, "high") == 3
        assert metrics.output_value(p, "low") == (a, b, c, d)
        assert metrics.output_value(p, "high") == (a, b, c, d)
    # Three all-to-all rounds: 3 * n * (n-1) network messages.
    assert metrics.message_count == 36


def test_three_round_divergent_inputs():
    inputs = [(a, b, c, d), (a, b, c, c), (a, b, d, d), (a, b, c, d)]
    sim, metrics = run_pc(Variant.THREE_ROUND, 4, 1, 4, inputs)
    common = mcp(inputs)
    for i in range(4):
        low = metrics.output_value(i, "low")
        assert is_prefix(common, low)
        for j in range(4):
            assert is_prefix(low, metrics.output_value(j, "high"))


def test_optimistic_fault_free_timing():
    inputs = [(a, b, c, d)] * 4
    sim, metrics = run_pc(Variant.OPTIMISTIC, 4, 1, 4, inputs)
    for p in range(4):
        assert metrics.output_time(p, "opt") == 2
        # Unanimous inputs: the optimistic value already has full length,
        # so low/high fire at the same quorum.
        assert metrics.output_time(p, "low") == 2
        assert metrics.output_time(p, "high") == 2
        assert metrics.output_value(p, "opt") == (a, b, c, d)


def test_optimistic_divergent_inputs_four_rounds():
    inputs = [(a, b, c, d), (a, b, c, c), (a, b, d, d), (a, c, c, d)]
    sim, metrics = run_pc(Variant.OPTIMISTIC, 4, 1, 4, inputs)
    for p in range(4):
        assert metrics.output_time(p, "opt") == 2
        assert metrics.output_time(p, "low") <= 4
        assert metrics.output_time(p, "high") <= 4
        assert is_prefix(metrics.output_value(p, "opt"), metrics.output_value(p, "low"))
        assert is_prefix(mcp(inputs), metrics.output_value(p, "opt"))


def test_fast_variant_two_rounds():
    inputs = [(a, b, c, d)] * 6
    sim, metrics = run_pc(Variant.FAST_5F1, 6, 1, 4, inputs)
    for p in range(6):
        assert metrics.output_time(p, "low") == 2
        assert metrics.output_time(p, "high") == 2


def test_engine_drops_malformed_and_duplicate():
    cfg = cfg3()
    scheme = MacScheme(4)
    engine = PcEngine(cfg, 0, scheme)
    engine.on_input((a, b, c, d))
    vec = (a, b, c, d)
    sig = scheme.sign_vector(1, crypto.VOTE1, cfg.instance, vec)
    vote = Vote(cfg.instance, 1, 1, vec, sig)
    assert engine.on_message(1, vote) == []
    # Duplicate sender in one round: first kept, second ignored.
    other = Vote(cfg.instance, 1, 1, (a,), scheme.sign_vector(1, crypto.VOTE1, cfg.instance, (a,)))
    engine.on_message(1, other)
    assert engine.votes[1][1].value == vec
    # Wrong transport sender and bad signature are dropped with a counter.
    before = engine.dropped
    engine.on_message(2, vote)
    bad = Vote(cfg.instance, 1, 3, vec, scheme.sign_vector(3, crypto.VOTE1, ("x",), vec))
    engine.on_message(3, bad)
    assert engine.dropped == before + 2
    assert engine.on_message(2, "junk") == [] and engine.dropped == before + 3


# ---------------------------------------------------------------------------
# Verifiability predicates


def honest_run_outputs(variant=Variant.THREE_ROUND, n=4, f=1, L=4):
    inputs = [(a, b, c, d), (a, b, c, c), (a, b, d, d), (a, b, c, d)][:n]
    sim, metrics = run_pc(variant, n, f, L, inputs)
    return sim, metrics


def test_predicates_accept_honest_outputs():
    cfg = cfg3()
    scheme = MacScheme(4)
    sim, metrics = honest_run_outputs()
    for p in range(4):
        low, proof_low, _ = metrics.outputs[p]["low"]
        high, proof_high, _ = metrics.outputs[p]["high"]
        assert predicate_low(low, proof_low, cfg, scheme)
        assert predicate_high(high, proof_high, cfg, scheme)


def test_predicates_reject_swapped_values():
    cfg = cfg3()
    scheme = MacScheme(4)
    sim, metrics = honest_run_outputs()
    for p in range(4):
        low, proof, _ = metrics.outputs[p]["low"]
        high, _, _ = metrics.outputs[p]["high"]
        if low != high:
            assert not predicate_low(high, proof, cfg, scheme)
            assert not predicate_high(low, proof, cfg, scheme)


def test_predicates_reject_corrupted_signature():
    cfg = cfg3()
    scheme = MacScheme(4)
    sim, metrics = honest_run_outputs()
    low, proof, _ = metrics.outputs[0]["low"]
    victim = proof.votes[0]
    flipped = bytes([victim.sig.blob[0] ^ 1]) + victim.sig.blob[1:]
    forged_vote = Vote(victim.inst, victim.round, victim.sender, victim.value,
                       crypto.Signature(victim.sender, flipped), victim.qcs)
    forged = QC(proof.round, (forged_vote,) + proof.votes[1:])
    assert not predicate_low(low, forged, cfg, scheme)
    assert not verify_qc(forged, cfg, scheme)


def test_optimistic_predicate_stages():
    cfg = PcConfig(4, 1, 4, Variant.OPTIMISTIC, ("t", "pc_opt"))
    scheme = MacScheme(4)
    inputs = [(a, b, c, d)] * 4
    sim, metrics = run_pc(Variant.OPTIMISTIC, 4, 1, 4, inputs)
    for p in range(4):
        low, proof_low, _ = metrics.outputs[p]["low"]
        high, proof_high, _ = metrics.outputs[p]["high"]
        assert proof_low.round == 2  # full-length optimistic stage
        assert predicate_low(low, proof_low, cfg, scheme)
        assert predicate_high(high, proof_high, cfg, scheme)


def test_conflicting_certified_prefixes_fault():
    # A vote set whose round-2 values conflict breaks the quorum
    # intersection assumption; certification faults loudly instead of
    # producing garbage.
    from prefixsim.pc import ProtocolViolation, qc3_certify as q3

    cfg = cfg3()
    with pytest.raises(ProtocolViolation):
        q3([(a, b), (a, c), (a,)], cfg)


def test_wrong_quorum_size_rejected():
    cfg = cfg3()
    scheme = MacScheme(4)
    votes = []
    for p in range(2):  # quorum is 3
        vec = (a, b, c, d)
        votes.append(Vote(cfg.instance, 1, p, vec, scheme.sign_vector(p, crypto.VOTE1, cfg.instance, vec)))
    assert not verify_qc(QC(1, tuple(votes)), cfg, scheme)
    dup = QC(1, (votes[0], votes[0], votes[1]))
    assert not verify_qc(dup, cfg, scheme)


def test_engine_runs_on_ed25519_backend():
    from prefixsim.crypto import Ed25519Scheme

    cfg = PcConfig(4, 1, 2, Variant.THREE_ROUND, ("t", "ed"))
    scheme = Ed25519Scheme(4)
    sim = Simulation(4, lambda p: PcEngine(cfg, p, scheme), policy=DelayPolicy.synchronized(1))
    for p in range(4):
        sim.schedule_input(p, (a, b))
    metrics = sim.run()
    for p in range(4):
        assert metrics.output_time(p, "low") == 3
        low, proof, _ = metrics.outputs[p]["low"]
        assert predicate_low(low, proof, cfg, scheme)


def test_fast_variant_certified_values_pairwise_consistent():
    # Under n >= 5f+1, any two round-1 certifications agree up to the
    # shorter one, across parties and schedules.
    from prefixsim.adversaries import JitteredDelays
    from prefixsim.simnet import DelayPolicy as DP

    rng = random.Random(5)
    for seed in range(20):
        inputs = [
            tuple(bytes([97 + rng.randrange(2)]) for _ in range(4)) for _ in range(6)
        ]
        cfg = PcConfig(6, 1, 4, Variant.FAST_5F1, ("t", "fastlemma"))
        scheme = MacScheme(6)
        sim = Simulation(
            6,
            lambda p: PcEngine(cfg, p, scheme),
            policy=DP(gst=None, default_delay=1),
            adversary=JitteredDelays(stretch=4),
            seed=seed,
        )
        for party, vec in enumerate(inputs):
            sim.schedule_input(party, vec)
        sim.run()
        certified = [
            qc1_certify(sim.engines[p].own_qcs[1], cfg)
            for p in range(6)
            if 1 in sim.engines[p].own_qcs
        ]
        for i in range(len(certified)):
            for j in range(i + 1, len(certified)):
                assert is_prefix(certified[i], certified[j]) or is_prefix(certified[j], certified[i])


def test_determinism_same_seed_same_transcript():
    inputs = [(a, b, c, d), (a, b, c, c), (a, b, d, d), (a, c, c, d)]
    _, m1 = run_pc(Variant.THREE_ROUND, 4, 1, 4, inputs, seed=7)
    _, m2 = run_pc(Variant.THREE_ROUND, 4, 1, 4, inputs, seed=7)
    assert m1.transcript_sha == m2.transcript_sha
    _, m3 = run_pc(Variant.THREE_ROUND, 4, 1, 4, inputs, seed=8)
    assert m1.transcript_sha == m3.transcript_sha  # no randomness in fixed-delay policy
