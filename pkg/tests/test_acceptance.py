"""Exit criteria. Each test records one PASS/FAIL line, printed in the terminal summary."""

import random
from fractions import Fraction

import numpy as np
import pytest

import make_golden
import oracle
from conftest import ACCEPTANCE_RESULTS, random_raster
from stegochain.formula_engine import Domain, first_word, make_plan, parse_golden_vectors
from stegochain.protocol import (FRAME_OVERHEAD_BITS, HEADER_BITS, Outcome, authenticate, frame_bit_length,
                                 open_session, receive_message, send_message)
from stegochain.stego_codec import StegoParams, capacity_chars, diff, embed, extract, plan_for
from stegochain.transport_sim import (Channel, FaultAction, SimConfig, inject_forgery, parse_script,
                                      run_scenario)


def record(criterion, ok, detail):
    ACCEPTANCE_RESULTS[criterion] = (bool(ok), detail)
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


def session_pair(default, auth):
    client, server = open_session(default)
    authenticate(client, auth)
    authenticate(server, auth)
    return client, server


def is_arithmetic(seq):
    step = seq[1] - seq[0]
    return all(b - a == step for a, b in zip(seq, seq[1:]))


def test_1_capacity_reproduction():
    got = (capacity_chars(1000, 100), capacity_chars(900, 100))
    record("1", got == (112, 100), f"capacity_chars(1000,100), (900,100) = {got}, expected (112, 100)")


def _random_case(r):
    w, h, c = r.randint(17, 128), r.randint(17, 128), r.choice([1, 3])
    total = w * h * c
    n = r.randint(2, total // FRAME_OVERHEAD_BITS)
    return w, h, c, StegoParams(Fraction(1, n), r.randint(1, 8))


def test_2_roundtrip_suite():
    r = random.Random(2002)
    passed = 0
    for case in range(500):
        w, h, c, params = _random_case(r)
        cover = random_raster(np.random.default_rng(case), w, h, c)
        usable = params.usable_slots(cover.total_slots)
        key = r.getrandbits(32)

        nbits = r.randint(0, usable)
        bits = np.array([r.getrandbits(1) for _ in range(nbits)], dtype=np.uint8)
        codec_ok = extract(embed(cover, key, bits, params), key, nbits, params).tolist() == bits.tolist()

        text = r.randbytes(r.randint(0, capacity_chars(usable, FRAME_OVERHEAD_BITS)))
        client, server = session_pair(r.getrandbits(32), key)
        verdict = receive_message(server, send_message(client, text, cover, params), params)
        passed += codec_ok and verdict.processed and verdict.plaintext == text
    record("2", passed == 500, f"{passed}/500 randomized round trips")


FIELDS = [(0, 32, "session"), (32, 64, "request"), (64, 96, "next_key"), (96, 112, "payload_len")]


def field_of(i):
    for lo, hi, name in FIELDS:
        if lo <= i < hi:
            return name
    return "body"


@pytest.fixture(scope="module")
def tamper_trials():
    """10^4 single-bit flips of embedded frame bits: (field, verdict, plaintext_altered)."""
    r = random.Random(3003)
    params = StegoParams(Fraction(1, 100), 3)
    out = []
    for m in range(20):
        cover = random_raster(np.random.default_rng(m), 128, 128, 3)
        text = r.randbytes(r.randint(1, 40))
        client, server = session_pair(0, r.getrandbits(32))
        key = client.current_key
        stego = send_message(client, text, cover, params)
        nbits = frame_bit_length(len(text))
        plan = plan_for(cover, key, nbits, params)
        for _ in range(500):
            i = r.randrange(nbits)
            px = stego.pixels.copy()
            px[plan.data_slots[i]] ^= np.uint8(1 << plan.bit_positions[i])
            state = server.snapshot()
            v = receive_message(state, stego.replace_pixels(px), params)
            out.append((field_of(i), v.outcome, v.processed and v.plaintext != text))
    return out


def test_3_tamper_detection(tamper_trials):
    good = sum(v is Outcome.RETRANSMIT or (f == "request" and v is Outcome.REJECT_REQUEST)
               for f, v, _ in tamper_trials)
    altered = sum(a for _, _, a in tamper_trials)
    counts = {}
    for _, v, _ in tamper_trials:
        counts[v.value] = counts.get(v.value, 0) + 1
    record("3", good >= 9999 and altered == 0,
           f"{good}/{len(tamper_trials)} retransmit-or-request-reject (need >= 9999), "
           f"{altered} processed with altered plaintext; verdicts {counts}")


def test_3b_tamper_verdict_matches_flipped_field(tamper_trials):
    expected = {
        "session": {Outcome.REJECT_SESSION},
        "request": {Outcome.REJECT_REQUEST},
        "next_key": {Outcome.RETRANSMIT},
        "payload_len": {Outcome.RETRANSMIT, Outcome.DECODE_FAILURE},
        "body": {Outcome.RETRANSMIT},
    }
    good = sum(v in expected[f] for f, v, _ in tamper_trials)
    processed = sum(v is Outcome.PROCESSED for _, v, _ in tamper_trials)
    record("3b", good >= 9999 and processed == 0,
           f"{good}/{len(tamper_trials)} verdicts from the stage owning the flipped field, {processed} processed")


def test_4_replay_and_forgery_rejection():
    script = parse_script("send PAY 100\nsend PAY 200\nsend BALANCE\nexpect 3 reject-request processed\n")
    t = run_scenario(script, [FaultAction("replay-previous", 3)])
    replays = [e for e in t.events if e.kind == "replay"]
    replay_ok = len(replays) == 1 and replays[0].verdict != "processed"

    r = random.Random(4004)
    client, server = session_pair(0, 1)
    channel = Channel(client, server, SimConfig())
    rejected = 0
    trials = 0
    while trials < 100:
        guess = r.getrandbits(32)
        if guess == server.current_key:
            continue
        trials += 1
        rejected += not inject_forgery(channel, guess, b"PAY 1000000", trials).processed
    record("4", replay_ok and rejected == 100,
           f"replay verdict {replays[0].verdict if replays else None}; {rejected}/100 forgeries rejected")


def test_5_stealth_bounds():
    r = random.Random(5005)
    violations = []
    embeds = 0
    for case in range(300):
        w, h, c, params = _random_case(r)
        cover = random_raster(np.random.default_rng(10_000 + case), w, h, c)
        nbits = r.randint(0, params.usable_slots(cover.total_slots))
        key = r.getrandbits(32)
        bits = np.array([r.getrandbits(1) for _ in range(nbits)], dtype=np.uint8)
        report = diff(cover, embed(cover, key, bits, params))
        embeds += 1
        if not nbits <= report.changed_bytes <= 2 * nbits:
            violations.append((case, "changed count", report.changed_bytes, nbits))
        if report.highest_changed_bit >= params.bit_planes:
            violations.append((case, "bit plane", report.highest_changed_bit, params.bit_planes))
        if nbits >= 16 and is_arithmetic(make_plan(key, cover.total_slots, nbits, params.bit_planes).data_slots):
            violations.append((case, "arithmetic progression"))
    record("5", not violations, f"{embeds} embeds, violations: {violations[:3]}")


def test_6_cross_implementation_determinism(data_dir):
    vectors = parse_golden_vectors((data_dir / "golden_vectors.txt").read_text())
    domains = {name for name, _, _ in vectors}
    pkg_ok = all(first_word(k, Domain[name]) == w for name, k, w in vectors)
    oracle_ok = all(oracle.first_word(k, name) == w for name, k, w in vectors)

    golden = (data_dir / "golden_transcript.txt").read_text()
    transcript = run_scenario(parse_script("send PAY 100\nsend BALANCE\nsend LOGOUT\n")).to_text()
    ok = (len(vectors) >= 20 and domains == set(Domain.__members__) and pkg_ok and oracle_ok
          and golden == make_golden.transcript_text() and transcript == golden)
    record("6", ok, f"{len(vectors)} vectors over {len(domains)} domains, package={pkg_ok}, oracle={oracle_ok}, "
                    f"transcript byte-identical={transcript == golden}")


def test_7_session_constancy():
    cover = random_raster(np.random.default_rng(7), 128, 128, 3)
    client, server = session_pair(0, 1)
    sid = server.session_id
    sessions, requests = set(), []
    processed = 0
    for i in range(50):
        requests.append(server.expected_request_id)
        v = receive_message(server, send_message(client, f"TXN {i}".encode(), cover))
        processed += v.processed
        sessions.add(server.session_id)
    gaps = [b - a for a, b in zip(requests, requests[1:])]
    ok = processed == 50 and sessions == {sid} and len(set(requests)) == 50 and len(set(gaps)) == len(gaps)
    record("7", ok, f"{processed}/50 processed, session ids {len(sessions)}, distinct request ids "
                    f"{len(set(requests))}, distinct gaps {len(set(gaps))}/{len(gaps)}")
