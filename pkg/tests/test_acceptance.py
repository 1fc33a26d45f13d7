"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with pytest (the lines are repeated in the terminal summary) or directly
with ``python tests/test_acceptance.py``.
"""
from __future__ import annotations

import itertools
import os
import random
import subprocess
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from certledger.capacity import CapacityParams, estimate_capacity, reference_figures  # noqa: E402
from certledger.client import LightClient, retrieve_state_proof, verify_handshake  # noqa: E402
from certledger.crypto import KeyPair, sha256  # noqa: E402
from certledger.ledger import Chain, PoolError  # noqa: E402
from certledger.sim import ScenarioConfig, Simulation, attack_split_world, random_config, run_simulation  # noqa: E402
from certledger.state import (  # noqa: E402
    AddTLSCert,
    AddTrustedCA,
    CAStatus,
    CertRecord,
    CertStatus,
    EventKind,
    ReportFraud,
    Resolution,
    ResolveFraud,
    RevokeCert,
    Transaction,
    TransactionError,
    TransferToken,
    UntrustCA,
    apply_transaction,
    evidence_message,
    invariant_violations,
    revocation_message,
)
from certledger.trie import Rejected, StateTrie, Verified, mean_proof_nodes, verify_proof, verify_proof_bytes  # noqa: E402

from conftest import T0, World  # noqa: E402

RESULTS: list[str] = []


def report(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'}  [{number:>2}] {title}: {detail}"
    RESULTS.append(line)
    print(line)


# ---------------------------------------------------------------------------
# 1. capacity figures


def check_capacity():
    start = time.perf_counter()
    anchors = reference_figures()
    estimate_capacity(CapacityParams())
    elapsed = time.perf_counter() - start
    worst = max(a.relative_error for a in anchors)
    ok = worst <= 0.02 and elapsed < 1.0 and len(anchors) == 5
    detail = ", ".join(f"{a.computed:.4g} {a.unit} vs {a.target:g}" for a in anchors)
    report(1, "capacity estimates within 2%", ok, f"{detail}; worst {worst:.2%}; {elapsed * 1000:.1f} ms")
    return ok


# ---------------------------------------------------------------------------
# 2. split-world attack


def check_split_world(runs: int = 100):
    start = time.perf_counter()
    attempts = false_accepts = failed_runs = 0
    for seed in range(runs):
        rep = attack_split_world(ScenarioConfig(seed=seed, victims=100))
        adversarial = [h for h in rep.handshakes if h["source"].startswith("adversary")]
        attempts += len(adversarial)
        false_accepts += sum(1 for h in adversarial if h["false_accept"])
        failed_runs += not rep.passed
    elapsed = time.perf_counter() - start
    ok = runs >= 100 and false_accepts == 0 and failed_runs == 0 and attempts > 0 and elapsed < 30
    report(2, "split-world attack never accepted", ok,
           f"{runs} runs, {attempts} adversarial handshakes, {false_accepts} false accepts, "
           f"{failed_runs} failed runs, {elapsed:.1f} s")
    return ok


# ---------------------------------------------------------------------------
# 3. revocation finality


def revocation_schedule(seed: int, base: World) -> tuple[int, int]:
    """One random schedule; returns (pre-revocation bundles checked, wrongly accepted)."""
    rng = random.Random(seed)
    chain = Chain(base.config)
    now = T0

    def block(*txs):
        nonlocal now
        for tx in txs:
            chain.submit(tx)
        now += 600
        return chain.produce(now)

    def noise():
        if rng.random() < 0.5:
            acct = chain.state.account(base.bob.address)
            return [Transaction.create(base.bob, acct.nonce, TransferToken(base.alice.address, rng.randint(0, 5)))]
        return []

    block(Transaction.create(base.cas[0], 0, AddTrustedCA(base.ca_certs[0]), base.board[:2]))
    cert, key = base.leaf(0, ("victim.example",), key=KeyPair.from_seed(f"finality/{seed}"))
    added = block(Transaction.create(base.alice, 0, AddTLSCert(cert))).block.header.number
    for _ in range(rng.randint(0, 6)):
        block(*noise())
    signer = key if rng.random() < 0.5 else base.cas[0]
    revoke = Transaction.create(base.alice, 1, RevokeCert(cert.cert_id, signer.sign(revocation_message(cert.cert_id))))
    n = block(revoke, *noise()).block.header.number
    assert chain.state.cert_record(cert.cert_id).status is CertStatus.REVOKED
    for _ in range(rng.randint(0, 6)):
        block(*noise())
    tip = rng.randint(n, chain.height)
    client = LightClient(chain.header(0), freshness=1).sync_headers(chain.header_chain()[1:tip + 1])
    checked = wrong = 0
    for h in range(added, n):
        bundle = retrieve_state_proof(chain, cert, h)
        # the bundle was genuine when issued: a client at tip h accepts it
        then = LightClient(chain.header(0), freshness=1).sync_headers(chain.header_chain()[1:h + 1])
        assert verify_handshake(then, "victim.example", bundle, chain.header(h).timestamp).accepted
        checked += 1
        wrong += verify_handshake(client, "victim.example", bundle, chain.header(tip).timestamp).accepted
    latest = retrieve_state_proof(chain, cert, tip)
    assert str(verify_handshake(client, "victim.example", latest, chain.header(tip).timestamp)) == "Reject(Revoked)"
    return checked, wrong


def check_revocation_finality(schedules: int = 1000):
    base = World()
    start = time.perf_counter()
    checked = wrong = 0
    for seed in range(schedules):
        c, w = revocation_schedule(seed, base)
        checked += c
        wrong += w
    elapsed = time.perf_counter() - start
    ok = wrong == 0 and checked >= schedules and elapsed < 60
    report(3, "revocation finality (k=1)", ok,
           f"{schedules} schedules, {checked} pre-revocation bundles replayed, {wrong} accepted, {elapsed:.1f} s")
    return ok


# ---------------------------------------------------------------------------
# 4. cascade completeness


def cascade_script(domains: list[str]) -> list[dict]:
    actions = [{"at": 1, "do": "add_ca", "ca": f"ca{i}", "expect": "ok"} for i in range(3)]
    actions += [{"at": 1, "do": "watch", "domain": d} for d in domains]
    # each CA account submits one certificate per block
    for i in range(60):
        d = domains[i % len(domains)]
        at = 2 + i // 3
        actions.append({"at": at, "do": "issue", "cert": f"c{i}", "ca": f"ca{i % 3}", "domain": d})
        actions.append({"at": at, "do": "add_cert", "cert": f"c{i}", "by": "ca", "expect": "ok"})
    actions += [
        {"at": 23, "do": "revoke", "cert": "c1", "signer": "holder", "by": "ca", "expect": "ok"},
        {"at": 24, "do": "untrust_ca", "ca": "ca1", "expect": "ok"},
        {"at": 25, "do": "issue", "cert": "fake", "ca": "ca2", "domain": domains[0], "holder": "adversary"},
        {"at": 25, "do": "add_cert", "cert": "fake", "expect": "ok"},
        {"at": 26, "do": "report", "fake": "fake", "genuine": "c0", "by": "relay", "expect": "ok"},
        {"at": 27, "do": "resolve", "report": 0, "verdict": "Upheld", "expect": "ok"},
        {"at": 29, "do": "idle"},
    ]
    return actions


def cascade_gaps(sim: Simulation) -> tuple[int, int, int]:
    """(live certs under untrusted CAs, revocations, revocations not seen by a watcher within 1 block)."""
    state = sim.chain.state
    untrusted = {cid for cid, e in state.trusted_cas().entries.items() if e.status is CAStatus.UNTRUSTED}
    live_bad = sum(1 for _, rec in state.records()
                   if isinstance(rec, CertRecord) and rec.status is CertStatus.NOT_REVOKED
                   and rec.certificate.issuer_id in untrusted)
    revocations = [e for e in sim.chain.events if e.kind is EventKind.CERT_REVOKED]
    missed = 0
    for ev in revocations:
        for domain in ev.domains:
            watcher = sim.watchers.get(domain.lower())
            if watcher is None:
                continue
            hits = [n for n in watcher.notifications if n.event == ev and n.lag <= 1]
            missed += not hits
    return live_bad, len(revocations), missed


def check_cascade():
    start = time.perf_counter()
    domains = [f"site{i}.example" for i in range(12)]
    sim = run_simulation(ScenarioConfig(name="cascade", seed=42, cas=3, domains=domains,
                                        actions=cascade_script(domains)))
    live_bad, revocations, missed = cascade_gaps(sim)
    untrusted = sum(1 for e in sim.chain.state.trusted_cas().entries.values() if e.status is CAStatus.UNTRUSTED)
    totals = [live_bad, revocations, missed, int(sim.report.passed), untrusted]
    for seed in range(8):
        rsim = run_simulation(random_config(seed, blocks=250))
        lb, rv, ms = cascade_gaps(rsim)
        totals[0] += lb
        totals[1] += rv
        totals[2] += ms
        totals[3] += rsim.report.passed
        totals[4] += sum(1 for e in rsim.chain.state.trusted_cas().entries.values()
                         if e.status is CAStatus.UNTRUSTED)
    elapsed = time.perf_counter() - start
    ok = totals[0] == 0 and totals[2] == 0 and totals[3] == 9 and totals[4] >= 2 and revocations >= 40
    report(4, "cascade completeness", ok,
           f"{totals[4]} untrusted CAs, {totals[1]} revocations, {totals[0]} live certs under untrusted CAs, "
           f"{totals[2]} revocations missed by watchers, {elapsed:.1f} s")
    return ok


# ---------------------------------------------------------------------------
# 5. trie correctness


def check_trie():
    start = time.perf_counter()
    rng = random.Random(5)
    pool = [rng.randbytes(32) for _ in range(2000)]
    trie, oracle, mismatches = StateTrie(), {}, 0
    for i in range(10_000):
        key = rng.choice(pool)
        op = rng.random()
        if op < 0.6:
            value = rng.randbytes(rng.randint(1, 16))
            trie = trie.insert(key, value)
            oracle[key] = value
        elif op < 0.85:
            mismatches += trie.get(key) != oracle.get(key)
        else:
            result = verify_proof(trie.root_hash, key, trie.prove(key))
            mismatches += result != Verified(oracle.get(key))
    mismatches += list(trie.items()) != sorted(oracle.items())

    pairs = [(rng.randbytes(32), rng.randbytes(8)) for _ in range(300)]
    roots = set()
    for _ in range(100):
        rng.shuffle(pairs)
        t = StateTrie()
        for k, v in pairs:
            t = t.insert(k, v)
        roots.add(t.root_hash)

    mutations = accepted = 0
    keys = [rng.choice(list(oracle)), rng.randbytes(32), rng.choice(list(oracle))]
    for key in keys:
        blob = trie.prove(key).to_bytes()
        assert isinstance(verify_proof_bytes(trie.root_hash, key, blob), Verified)
        for i in range(len(blob)):
            for b in range(256):
                if b == blob[i]:
                    continue
                mutated = blob[:i] + bytes([b]) + blob[i + 1:]
                mutations += 1
                accepted += not isinstance(verify_proof_bytes(trie.root_hash, key, mutated), Rejected)
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and len(roots) == 1 and accepted == 0
    report(5, "trie agrees with oracle, order-free roots, mutations rejected", ok,
           f"10000 ops / {mismatches} mismatches; 100 permutations / {len(roots)} distinct root; "
           f"{mutations} single-byte proof mutations / {accepted} accepted; {elapsed:.1f} s")
    return ok


# ---------------------------------------------------------------------------
# 6. proof size scaling


def check_proof_scaling():
    start = time.perf_counter()
    sizes = (10**3, 10**4, 10**5)
    means = [mean_proof_nodes(n, samples=512, seed=n) for n in sizes]
    elapsed = time.perf_counter() - start
    ratio = (means[2] - means[1]) / (means[1] - means[0])
    ok = 0.5 <= ratio <= 2 and elapsed < 120
    report(6, "logarithmic proof growth", ok,
           f"mean nodes {means[0]:.2f} / {means[1]:.2f} / {means[2]:.2f}, increment ratio {ratio:.3f}, "
           f"{elapsed:.1f} s")
    return ok, sizes, means


# ---------------------------------------------------------------------------
# 7. conservation and atomicity


def random_tx(rng: random.Random, w: World, chain: Chain, certs: list):
    people = [w.alice, w.bob, *w.cas]
    sender = rng.choice(people)
    acct = chain.state.account(sender.address)
    nonce = acct.nonce if rng.random() > 0.05 else acct.nonce + rng.choice([-1, 1, 2])
    roll = rng.random()
    board = []
    if roll < 0.35:
        body = TransferToken(rng.choice(people).address if rng.random() < 0.9 else sha256(bytes([rng.randrange(256)])),
                             rng.choice([0, rng.randint(1, 300), 10**6]))
    elif roll < 0.55:
        cert, key = w.leaf(rng.randrange(2), (rng.choice(["a.example", "b.example", "Bad_Name"]),),
                           days=rng.choice([90, 900]))
        certs.append((cert, key))
        body = AddTLSCert(cert)
    elif roll < 0.7 and certs:
        cert, key = rng.choice(certs)
        signer = rng.choice([key, w.cas[0], w.cas[1], w.bob])
        body = RevokeCert(cert.cert_id, signer.sign(revocation_message(cert.cert_id)))
    elif roll < 0.8 and len(certs) > 1:
        (fake, _), (genuine, gkey) = rng.sample(certs, 2)
        body = ReportFraud(fake.cert_id, genuine.cert_id, gkey.sign(evidence_message(fake.cert_id, sender.address)))
    elif roll < 0.9:
        body = ResolveFraud(rng.randrange(3), rng.choice([Resolution.UPHELD, Resolution.DISMISSED]))
        board = rng.sample(w.board, rng.randint(0, 3))
    else:
        body = rng.choice([UntrustCA(w.ca_certs[rng.randrange(2)].cert_id), AddTrustedCA(w.ca_certs[rng.randrange(2)])])
        board = rng.sample(w.board, rng.randint(0, 3))
    tx = Transaction.create(sender, max(nonce, 0), body, board)
    if rng.random() < 0.03:
        tx = tx.with_board_signatures(()) if board else Transaction(
            tx.sender_key, tx.nonce, tx.kind, tx.payload, (), bytes(64))
    return tx


def check_conservation(sequences: int = 1000, length: int = 10):
    start = time.perf_counter()
    txs = included = rejected = violations = 0
    for seed in range(sequences):
        rng = random.Random(seed)
        w = World()
        chain = Chain(w.config)
        certs: list = []
        chain.submit(Transaction.create(w.cas[0], 0, AddTrustedCA(w.ca_certs[0]), w.board[:2]))
        chain.submit(Transaction.create(w.cas[1], 0, AddTrustedCA(w.ca_certs[1]), w.board[1:]))
        chain.produce(T0 + 600)
        for step in range(length):
            tx = random_tx(rng, w, chain, certs)
            txs += 1
            parent_root = chain.state.root
            try:
                chain.submit(tx)
            except PoolError:
                rejected += 1
                violations += chain.state.root != parent_root
                continue
            result = chain.produce(chain.tip.timestamp + 600)
            if result.dropped:
                rejected += 1
                violations += result.block.header.state_root != parent_root
                # execution itself must also refuse it against the parent state
                try:
                    apply_transaction(chain.state_at(chain.height - 1), tx, result.block.header.timestamp,
                                      chain.height)
                    violations += 1
                except TransactionError:
                    pass
            else:
                included += 1
            violations += chain.state.total_balance() != w.config.total_supply
            violations += any(a.balance < 0 for _, a in chain.state.accounts())
        violations += len(invariant_violations(chain.state))
    elapsed = time.perf_counter() - start
    ok = violations == 0 and included > 0 and rejected > 0
    report(7, "token conservation and atomic rejection", ok,
           f"{sequences} sequences, {txs} txs ({included} applied, {rejected} rejected), "
           f"{violations} violations, {elapsed:.1f} s")
    return ok


# ---------------------------------------------------------------------------
# 8. threshold soundness


def threshold_cases(t: int, n: int):
    w = World(threshold=t, board_size=n)
    outsider = KeyPair.from_seed("threshold/outsider")
    base = w.state
    # a state with ca0 trusted and a fraud report open, for untrust / resolve
    w.apply(w.cas[0], AddTrustedCA(w.ca_certs[0]), w.board[:t])
    w.apply(w.cas[1], AddTrustedCA(w.ca_certs[1]), w.board[:t])
    genuine, gkey = w.add_leaf(0, ("t.example",))
    fake, _ = w.add_leaf(1, ("t.example",), owner=w.bob)
    w.apply(w.alice, ReportFraud(fake.cert_id, genuine.cert_id,
                                 gkey.sign(evidence_message(fake.cert_id, w.alice.address))))
    governed = w.state
    ops = {
        "AddTrustedCA": (base, w.cas[0], AddTrustedCA(w.ca_certs[0])),
        "UntrustCA": (governed, w.bob, UntrustCA(w.ca_certs[0].cert_id)),
        "resolve_fraud": (governed, w.bob, ResolveFraud(0, Resolution.UPHELD)),
    }
    extras = ["none", "duplicate", "outsider", "garbage", "wrong-digest"]
    for name, (state, sender, body) in ops.items():
        acct = state.account(sender.address)
        for r in range(n + 1):
            for subset in itertools.combinations(range(n), r):
                for extra in extras:
                    tx = Transaction.create(sender, acct.nonce, body, [w.board[i] for i in subset])
                    sigs = list(tx.board_signatures)
                    if extra == "duplicate" and sigs:
                        sigs.append(sigs[0])
                    elif extra == "outsider":
                        sigs.append((outsider.public, outsider.sign(tx.digest())))
                    elif extra == "garbage":
                        missing = [k for k in w.board if k.public not in {s[0] for s in sigs}]
                        if missing:
                            sigs.append((missing[0].public, bytes(64)))
                    elif extra == "wrong-digest":
                        missing = [k for k in w.board if k.public not in {s[0] for s in sigs}]
                        if missing:
                            sigs.append((missing[0].public, missing[0].sign(b"some other message")))
                    tx = tx.with_board_signatures(sigs)
                    yield name, len(subset), extra, t, state, tx, w.now


def check_threshold():
    start = time.perf_counter()
    cases = unsound = 0
    for t, n in ((2, 3), (3, 5)):
        for name, k, extra, t_, state, tx, now in threshold_cases(t, n):
            cases += 1
            try:
                apply_transaction(state, tx, now, 99)
                accepted, code = True, None
            except TransactionError as exc:
                accepted, code = False, exc.code
            should = k >= t_
            if accepted != should or (not accepted and code != "BelowThreshold"):
                unsound += 1
    elapsed = time.perf_counter() - start
    ok = unsound == 0 and cases == 3 * 5 * (2**3 + 2**5)
    report(8, "threshold soundness (2,3) and (3,5)", ok,
           f"{cases} signer sets over AddTrustedCA/UntrustCA/resolve_fraud, {unsound} unsound, {elapsed:.1f} s")
    return ok


# ---------------------------------------------------------------------------
# 9. determinism


def _cli_run(outdir: Path, hashseed: str) -> dict[str, bytes]:
    outdir.mkdir(parents=True, exist_ok=True)
    env = dict(os.environ, PYTHONHASHSEED=hashseed)
    outputs = {}
    for kind, extra in (("split-world", []), ("rogue-revocation", []), ("random", ["--blocks", "300"])):
        proc = subprocess.run(
            [sys.executable, "-m", "certledger", "run-scenario", "--builtin", kind, "--seed", "7", *extra,
             "--report", str(outdir / f"{kind}.json"), "--chain-out", str(outdir / f"{kind}.chain"),
             "--events", str(outdir / f"{kind}.events"), "--plot-dir", str(outdir)],
            capture_output=True, env=env, check=False)
        outputs[f"{kind}.stdout"] = proc.stdout
        outputs[f"{kind}.exit"] = str(proc.returncode).encode()
    proc = subprocess.run([sys.executable, "-m", "certledger", "estimate", "--reference", "--plot-dir", str(outdir)],
                          capture_output=True, env=env, check=False)
    outputs["estimate.stdout"] = proc.stdout
    outputs["estimate.exit"] = str(proc.returncode).encode()
    for path in sorted(outdir.iterdir()):
        outputs[path.name] = path.read_bytes()
    for key in list(outputs):
        if key.endswith(".stdout"):
            outputs[key] = outputs[key].replace(str(outdir).encode(), b"OUT")
    return outputs


def check_determinism(tmp: Path):
    start = time.perf_counter()
    a = _cli_run(tmp / "run-a", "1")
    b = _cli_run(tmp / "run-b", "2")
    differing = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    chains = [k for k in a if k.endswith(".chain")]
    elapsed = time.perf_counter() - start
    exits_ok = all(v == b"0" for k, v in a.items() if k.endswith(".exit"))
    ok = not differing and exits_ok and len(chains) == 3 and all(a[k] for k in chains)
    report(9, "byte-identical reruns", ok,
           f"exit codes {'all 0' if exits_ok else 'nonzero'}, {len(a)} artifacts compared (chains, reports, event logs, figures, stdout), "
           f"{len(differing)} differ{': ' + ', '.join(differing) if differing else ''}; {elapsed:.1f} s")
    return ok


# ---------------------------------------------------------------------------
# 10. end-to-end fraud workflow


def check_fraud_workflow():
    sim = run_simulation(ScenarioConfig(name="fraud", kind="split-world", seed=1, victims=10))
    rep = sim.report
    fake = sim.certs["fake"].cert.cert_id
    rogue = sim.ca_certs["ca1"].cert_id
    log = [(e["kind"], e["block"]) for e in rep.events
           if e["cert_id"] == fake.hex() or e["ca_id"] == rogue.hex() and e["kind"] == "CAUntrusted"]
    wanted = ["CertAdded", "FraudReported", "PleaAdded", "FraudResolved", "CAUntrusted", "CertRevoked"]
    kinds = [k for k, _ in log if k in wanted]
    resolved = [e for e in rep.events if e["kind"] == "FraudResolved"]
    fake_handshakes = [h["decision"] for h in rep.handshakes if h["cert"] == "fake" and h["source"] == "full-node"]
    watcher = sim.watchers[sim.cfg.domains[0]]
    alerted = {n.event.kind.value for n in watcher.notifications if n.event.cert_id == fake and n.lag <= 1}
    state = sim.chain.state
    ok = (rep.passed and kinds == wanted and resolved and resolved[0]["detail"] == "UPHELD"
          and fake_handshakes == ["Reject(AbsentFromLedger)", "Accept", "Reject(Revoked)"]
          and {"CertAdded", "FraudReported", "PleaAdded", "FraudResolved", "CertRevoked"} <= alerted
          and state.trusted_cas().entries[rogue].status is CAStatus.UNTRUSTED
          and state.cert_record(fake).status is CertStatus.REVOKED)
    trail = " -> ".join(f"{k}@{b}" for k, b in log)
    report(10, "fraud workflow end to end", ok,
           f"handshakes {' / '.join(fake_handshakes)}; events {trail}; watcher saw {len(alerted)} kinds")
    return ok


# ---------------------------------------------------------------------------
# pytest entry points


def test_01_capacity():
    assert check_capacity()


def test_02_split_world():
    assert check_split_world()


def test_03_revocation_finality():
    assert check_revocation_finality()


def test_04_cascade():
    assert check_cascade()


def test_05_trie():
    assert check_trie()


def test_06_proof_scaling(tmp_path):
    ok, sizes, means = check_proof_scaling()
    from certledger.plotting import plot_proof_scaling
    assert plot_proof_scaling(sizes, means, tmp_path).exists()
    assert ok


def test_07_conservation():
    assert check_conservation()


def test_08_threshold():
    assert check_threshold()


def test_09_determinism(tmp_path):
    assert check_determinism(tmp_path)


def test_10_fraud_workflow():
    assert check_fraud_workflow()


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        results = [check_capacity(), check_split_world(), check_revocation_finality(), check_cascade(),
                   check_trie(), check_proof_scaling()[0], check_conservation(), check_threshold(),
                   check_determinism(Path(tmp)), check_fraud_workflow()]
    print(f"{sum(results)}/{len(results)} criteria passed")
    sys.exit(0 if all(results) else 1)
