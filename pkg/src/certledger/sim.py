"""Seeded, deterministic scenario simulator.

Time is simulated: step ``h`` runs the actions scheduled ``at: h`` against a
chain whose tip is ``h - 1``, then the scheduled authority produces block
``h`` at ``genesis_time + h * block_time``. Watchers and the shared light
client see each block as soon as it is produced.

Scenario files are JSON objects with the fields of :class:`ScenarioConfig`.
``actions`` is a list of objects with a ``do`` verb and an ``at`` step; see
:meth:`Simulation.perform` for the verbs. Any action may carry ``expect``;
a mismatch becomes a failed assertion in the report.

Each account keeps at most one transaction in flight. An action whose
sender still has one pending waits for the next step, so a rejected
transaction never strands later ones behind a nonce gap.
"""
from __future__ import annotations

import json
import random
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable

from .cert import Certificate, issue_certificate
from .client import (
    HandshakeBundle,
    HandshakeDecision,
    LightClient,
    Reason,
    retrieve_state_proof,
    verify_handshake,
)
from .crypto import KeyPair, sha256
from .ledger import Chain, PoolError, scheduled_proposer
from .state import (
    BOARD_ACCOUNT,
    DEFAULT_FEES,
    AddTLSCert,
    AddTrustedCA,
    CAStatus,
    CertRecord,
    CertStatus,
    Event,
    EventKind,
    GenesisConfig,
    PleadFraud,
    ReportFraud,
    Resolution,
    ResolveFraud,
    RevokeCert,
    Transaction,
    TransferToken,
    TxKind,
    UntrustCA,
    WorldState,
    cert_address,
    evidence_message,
    invariant_violations,
    plea_message,
    revocation_message,
)

KINDS = ("script", "split-world", "rogue-revocation", "random")
DAY = 86400


class ConfigInvalid(ValueError):
    pass


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    kind: str = "script"
    seed: int = 0
    block_time: int = 600
    genesis_time: int = 1_700_000_000
    threshold: int = 2
    board_size: int = 3
    authorities: int = 3
    cas: int = 2
    domains: list[str] = field(default_factory=lambda: ["example.com"])
    fees: dict[str, int] = field(default_factory=dict)
    initial_balance: int = 10_000
    freshness: int = 1
    blocks: int = 0
    victims: int = 100
    check_every: int = 25
    actions: list[dict[str, Any]] = field(default_factory=list)

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigInvalid(f"kind must be one of {', '.join(KINDS)}")
        if not 1 <= self.threshold <= self.board_size:
            raise ConfigInvalid("board threshold must satisfy 1 <= t <= n")
        if self.block_time <= 0 or self.authorities <= 0 or self.freshness <= 0:
            raise ConfigInvalid("block_time, authorities and freshness must be positive")
        if self.cas < 1 or not self.domains:
            raise ConfigInvalid("need at least one CA and one domain")
        if self.kind in ("split-world", "rogue-revocation") and self.cas < 2:
            raise ConfigInvalid(f"{self.kind} needs two CAs")
        if not 0 <= self.seed < 2**64:
            raise ConfigInvalid("seed must be an unsigned 64-bit integer")
        for name in self.fees:
            if name not in TxKind.__members__:
                raise ConfigInvalid(f"unknown fee kind {name!r}")
        for i, action in enumerate(self.actions):
            if "do" not in action:
                raise ConfigInvalid(f"action {i} has no 'do' verb")
            if not hasattr(Simulation, "_do_" + action["do"].replace("-", "_")):
                raise ConfigInvalid(f"action {i}: unknown verb {action['do']!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigInvalid(f"unknown config fields: {', '.join(sorted(unknown))}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(str(exc)) from None
        return cls.from_dict(data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


@dataclass
class Notification:
    delivered_at: int
    event: Event

    @property
    def lag(self) -> int:
        return self.delivered_at - self.event.block_number


class EventWatcher:
    """Collects certificate events that touch any of the watched domains."""

    def __init__(self, domains: Iterable[str]) -> None:
        self.domains = {d.lower() for d in domains}
        self.notifications: list[Notification] = []

    def matches(self, event: Event) -> bool:
        return any(d.lower() in self.domains for d in event.domains)

    def feed(self, block_number: int, events: Iterable[Event]) -> None:
        for ev in events:
            if self.matches(ev):
                self.notifications.append(Notification(block_number, ev))

    @property
    def max_lag(self) -> int:
        return max((n.lag for n in self.notifications), default=0)

    def kinds(self) -> list[EventKind]:
        return [n.event.kind for n in self.notifications]


def watch_events(chain: Chain, domain: str | Iterable[str]) -> EventWatcher:
    """Subscribe a watcher to ``chain``, replaying events already on it."""
    watcher = EventWatcher([domain] if isinstance(domain, str) else domain)
    for ev in chain.events:
        watcher.feed(ev.block_number, [ev])
    chain.subscribers.append(watcher.feed)
    return watcher


@dataclass
class CertInfo:
    cert: Certificate
    key: KeyPair
    holder: str
    ca: str


@dataclass
class ScenarioReport:
    name: str
    kind: str
    seed: int
    outcomes: list[dict] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    handshakes: list[dict] = field(default_factory=list)
    assertions: list[dict] = field(default_factory=list)
    blocks: int = 0
    final_state_root: str = ""
    tip_hash: str = ""

    @property
    def passed(self) -> bool:
        return all(a["passed"] for a in self.assertions)

    def failures(self) -> list[dict]:
        return [a for a in self.assertions if not a["passed"]]

    def to_dict(self) -> dict:
        return asdict(self) | {"passed": self.passed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


class Simulation:
    def __init__(self, config: ScenarioConfig) -> None:
        config.validate()
        self.cfg = config
        self.board = [self._key("board", i) for i in range(config.board_size)]
        self.foundation = self._key("foundation")
        self.ca_labels = [f"ca{i}" for i in range(config.cas)]
        self.ca_keys = {label: self._key("ca", label) for label in self.ca_labels}
        self.ca_certs = {
            label: issue_certificate(
                key, key.public, f"{label.upper()} Root", [],
                config.genesis_time - DAY, config.genesis_time + 3650 * DAY,
                self._serial("ca", label), is_ca=True)
            for label, key in self.ca_keys.items()
        }
        self.owner_keys = {d: self._key("owner", d) for d in config.domains}
        self.named_keys = {name: self._key(name) for name in ("relay", "adversary", "unrelated")}
        funded = [self.named_keys["relay"], self.named_keys["adversary"],
                  *self.ca_keys.values(), *self.owner_keys.values()]
        fees = dict(DEFAULT_FEES)
        fees.update({TxKind[k]: v for k, v in config.fees.items()})
        self.genesis = GenesisConfig(
            board_keys=tuple(k.public for k in self.board),
            threshold=config.threshold,
            foundation_key=self.foundation.public,
            fee_schedule=fees,
            allocations={k.public: config.initial_balance for k in funded},
            authorities=tuple(sha256(b"authority", str(config.seed).encode(), bytes([i]))
                              for i in range(config.authorities)),
            timestamp=config.genesis_time,
        )
        self.chain = Chain(self.genesis)
        self.client = LightClient(self.chain.tip, config.freshness)
        self.certs: dict[str, CertInfo] = {}
        self.watchers: dict[str, EventWatcher] = {}
        self.report = ScenarioReport(config.name, config.kind, config.seed)
        self.schedule: dict[int, list[dict]] = defaultdict(list)
        self._pending: dict[bytes, tuple[dict, dict]] = {}
        self._revoking: set[str] = set()
        self._alt_roots: set[bytes] = set()
        self._invariant_problems: list[str] = []
        self.rng = random.Random(config.seed)

    # -- helpers ---------------------------------------------------------

    def _key(self, *parts: Any) -> KeyPair:
        return KeyPair.from_seed("/".join([str(self.cfg.seed), *map(str, parts)]))

    def _serial(self, *parts: Any) -> bytes:
        return sha256("/".join([str(self.cfg.seed), "serial", *map(str, parts)]).encode())[:16]

    @property
    def now(self) -> int:
        """Wall time between the tip and the next block."""
        return self.chain.tip.timestamp + self.cfg.block_time // 2

    def account_key(self, role: str) -> KeyPair:
        if role.startswith("owner:"):
            return self.owner_keys[role[6:]]
        if role.startswith("ca:"):
            return self.ca_keys[role[3:]]
        if role == "foundation":
            return self.foundation
        if role in self.named_keys:
            return self.named_keys[role]
        raise ConfigInvalid(f"unknown account role {role!r}")

    def account_address(self, role: str) -> bytes:
        if role == "board":
            return BOARD_ACCOUNT
        if role.startswith("new:"):
            return sha256(b"fresh-account", role.encode())
        return self.account_key(role).address

    def next_nonce(self, key: KeyPair) -> int:
        acct = self.chain.state.account(key.address)
        base = acct.nonce if acct else 0
        return base + sum(1 for tx in self.chain.pool.pending() if tx.sender == key.address)

    def _signers(self, action: dict) -> list[KeyPair]:
        idx = action.get("signers", list(range(self.cfg.threshold)))
        return [self.board[i] for i in idx]

    def cert(self, label: str) -> CertInfo:
        try:
            return self.certs[label]
        except KeyError:
            raise ConfigInvalid(f"unknown certificate label {label!r}") from None

    def _assert(self, name: str, passed: bool, detail: str = "") -> None:
        self.report.assertions.append({"name": name, "passed": bool(passed), "detail": detail})

    def _record(self, action: dict, result: str) -> dict:
        outcome = {"index": len(self.report.outcomes), "at": self.chain.height + 1,
                   "do": action["do"], "result": result}
        for k in ("cert", "ca", "domain", "report"):
            if k in action:
                outcome[k] = action[k]
        self.report.outcomes.append(outcome)
        if result != "pending":
            self._check_expect(action, outcome)
        return outcome

    def _check_expect(self, action: dict, outcome: dict) -> None:
        if "expect" in action:
            want = action["expect"]
            ok = outcome["result"] == want or outcome["result"].startswith(want + " ")
            self._assert(f"action {outcome['index']} ({action['do']})", ok,
                         f"expected {want}, got {outcome['result']}")

    def busy(self, key: KeyPair) -> bool:
        return any(tx.sender == key.address for tx in self.chain.pool.pending())

    def _submit(self, action: dict, sender: KeyPair, body, board: Iterable[KeyPair] = ()) -> dict | None:
        if self.busy(sender):
            self.schedule[self.chain.height + 2].append(action)
            return None
        tx = Transaction.create(sender, self.next_nonce(sender), body, board)
        try:
            self.chain.submit(tx)
        except PoolError as exc:
            return self._record(action, f"error:{exc.code}")
        outcome = self._record(action, "pending")
        self._pending[tx.tx_hash] = (action, outcome)
        return outcome

    # -- action verbs ----------------------------------------------------

    def perform(self, action: dict) -> None:
        """Run one scheduled action.

        Verbs: issue, add_ca, untrust_ca, add_cert, revoke, report, plead,
        resolve, transfer, handshake, split_world, watch,
        expect_notification, expect_status, expect_ca, idle.
        """
        getattr(self, "_do_" + action["do"].replace("-", "_"))(action)

    def _do_idle(self, action: dict) -> None:
        self._record(action, "ok")

    def _do_issue(self, action: dict) -> None:
        label = action["cert"]
        ca = action.get("ca", self.ca_labels[0])
        domain = action.get("domain", self.cfg.domains[0])
        sans = action.get("sans", [domain])
        holder = action.get("holder", f"owner:{domain}")
        key = self._key("certkey", label)
        start = self.chain.tip.timestamp + action.get("not_before_offset", -3600)
        cert = issue_certificate(
            self.ca_keys[ca], key.public, sans[0], sans, start,
            start + action.get("days", 90) * DAY, self._serial("cert", label),
            issuer=self.ca_certs[ca])
        self.certs[label] = CertInfo(cert, key, holder, ca)
        self._record(action, "ok")

    def _do_add_ca(self, action: dict) -> None:
        ca = action["ca"]
        self._submit(action, self.ca_keys[ca], AddTrustedCA(self.ca_certs[ca]), self._signers(action))

    def _do_untrust_ca(self, action: dict) -> None:
        ca = action["ca"]
        self._submit(action, self.named_keys["relay"], UntrustCA(self.ca_certs[ca].cert_id),
                     self._signers(action))

    def _do_add_cert(self, action: dict) -> None:
        info = self.cert(action["cert"])
        by = action.get("by", info.holder)
        sender = self.ca_keys[info.ca] if by == "ca" else self.account_key(by)
        self._submit(action, sender, AddTLSCert(info.cert))

    def _do_revoke(self, action: dict) -> None:
        info = self.cert(action["cert"])
        signer = action.get("signer", "holder")
        if signer == "holder":
            skey = info.key
        elif signer == "issuer":
            skey = self.ca_keys[info.ca]
        else:
            skey = self.account_key(signer)
        by = action.get("by", info.holder)
        sender = self.ca_keys[info.ca] if by == "ca" else self.account_key(by)
        sig = skey.sign(revocation_message(info.cert.cert_id))
        self._submit(action, sender, RevokeCert(info.cert.cert_id, sig))

    def _do_report(self, action: dict) -> None:
        fake, genuine = self.cert(action["fake"]), self.cert(action["genuine"])
        reporter = self.account_key(action.get("by", genuine.holder))
        sig = genuine.key.sign(evidence_message(fake.cert.cert_id, reporter.address))
        self._submit(action, reporter, ReportFraud(fake.cert.cert_id, genuine.cert.cert_id, sig))

    def _do_plead(self, action: dict) -> None:
        ca = action["ca"]
        doc = sha256(b"issuance-documents", str(action["report"]).encode())
        sig = self.ca_keys[ca].sign(plea_message(action["report"], doc))
        self._submit(action, self.ca_keys[ca], PleadFraud(action["report"], doc, sig))

    def _do_resolve(self, action: dict) -> None:
        verdict = Resolution[action.get("verdict", "Upheld").upper()]
        self._submit(action, self.named_keys["relay"], ResolveFraud(action["report"], verdict),
                     self._signers(action))

    def _do_transfer(self, action: dict) -> None:
        sender = self.account_key(action["from"])
        recipient = self.account_address(action["to"])
        self._submit(action, sender, TransferToken(recipient, int(action["amount"])))

    def _do_watch(self, action: dict) -> None:
        domain = action["domain"]
        if domain not in self.watchers:
            self.watchers[domain] = watch_events(self.chain, domain)
        self._record(action, "ok")

    def expected_decision(self, info: CertInfo, domain: str) -> str:
        """What an honest client should decide, computed from the full node's records."""
        cert = info.cert
        if not cert.covers(domain):
            return str(HandshakeDecision(Reason.DOMAIN_MISMATCH))
        if not cert.not_before <= self.now <= cert.not_after:
            return str(HandshakeDecision(Reason.OUTSIDE_VALIDITY))
        rec = self.chain.state.cert_record(cert.cert_id)
        if rec is None:
            return str(HandshakeDecision(Reason.ABSENT_FROM_LEDGER))
        if rec.status is CertStatus.REVOKED:
            return str(HandshakeDecision(Reason.REVOKED))
        return str(HandshakeDecision(Reason.OK))

    def _handshake(self, label: str, domain: str, bundle: HandshakeBundle, source: str) -> str:
        decision = verify_handshake(self.client, domain, bundle, self.now)
        self.report.handshakes.append({
            "at": self.chain.height + 1, "cert": label, "domain": domain,
            "block": bundle.block_number, "source": source, "decision": str(decision),
        })
        return str(decision)

    def _do_handshake(self, action: dict) -> None:
        info = self.cert(action["cert"])
        domain = action.get("domain", info.cert.subject_alternative_names[0])
        block = action.get("block", self.chain.height)
        bundle = retrieve_state_proof(self.chain, info.cert, block)
        result = self._handshake(action["cert"], domain, bundle, "full-node")
        if action.get("expect") == "oracle":
            action = dict(action, expect=self.expected_decision(info, domain))
        self._record(action, result)

    def alternate_bundle(self, info: CertInfo) -> HandshakeBundle:
        """A proof for ``info`` served from the adversary's private state.

        The adversary copies the consensus state at the tip, writes a live
        record for the certificate into its own trie and proves from that.
        """
        honest = self.chain.state
        record = CertRecord(info.cert, CertStatus.NOT_REVOKED, self.chain.height)
        alt = WorldState(honest.trie.fork().insert(cert_address(info.cert.cert_id), record.encode()))
        self._alt_roots.add(alt.root)
        proof = alt.trie.prove(cert_address(info.cert.cert_id))
        return HandshakeBundle(info.cert, proof.value, proof, self.chain.height)

    def _do_split_world(self, action: dict) -> None:
        info = self.cert(action["cert"])
        domain = action.get("domain", info.cert.subject_alternative_names[0])
        victims = int(action.get("victims", self.cfg.victims))
        bundle = self.alternate_bundle(info)
        consensus_roots = {h.state_root for h in self.client.headers.values()}
        # writing a record identical to the honest one reproduces the honest root
        honest_root = bool(bundle.proof.path_nodes) and sha256(bundle.proof.path_nodes[0]) in consensus_roots
        results = []
        for i in range(victims):
            # every victim independently syncs the consensus header chain
            victim = LightClient(self.chain.header(0), self.cfg.freshness)
            victim = victim.sync_headers(self.chain.header_chain()[1:])
            decision = verify_handshake(victim, domain, bundle, self.now)
            self.report.handshakes.append({
                "at": self.chain.height + 1, "cert": action["cert"], "domain": domain,
                "block": bundle.block_number, "source": f"adversary/victim{i}",
                "decision": str(decision), "false_accept": decision.accepted and not honest_root,
            })
            results.append(decision)
        accepted = sum(d.accepted for d in results)
        reasons = sorted({str(d) for d in results})
        self._record(action, f"{victims - accepted}/{victims} rejected {','.join(reasons)}")
        self._assert(f"split-world probe at step {self.chain.height + 1}",
                     accepted == 0 or honest_root,
                     f"{accepted} of {victims} victims accepted an alternate-state proof")

    def _do_expect_notification(self, action: dict) -> None:
        watcher = self.watchers.get(action["domain"])
        kind = EventKind(action["kind"])
        want_id = self.cert(action["cert"]).cert.cert_id if "cert" in action else None
        hits = [] if watcher is None else [
            n for n in watcher.notifications
            if n.event.kind is kind and (want_id is None or n.event.cert_id == want_id)]
        within = action.get("within", 1)
        ok = bool(hits) and min(n.lag for n in hits) <= within
        self._record(action, "ok" if ok else "missing")
        self._assert(f"watcher {action['domain']} saw {kind.value}", ok,
                     f"{len(hits)} matching notifications")

    def _do_expect_status(self, action: dict) -> None:
        rec = self.chain.state.cert_record(self.cert(action["cert"]).cert.cert_id)
        got = "Absent" if rec is None else {CertStatus.NOT_REVOKED: "NotRevoked",
                                             CertStatus.REVOKED: "Revoked"}[rec.status]
        self._record(action, got)
        self._assert(f"status of {action['cert']}", got == action["status"],
                     f"expected {action['status']}, got {got}")

    def _do_expect_ca(self, action: dict) -> None:
        entry = self.chain.state.trusted_cas().entries.get(self.ca_certs[action["ca"]].cert_id)
        got = "Absent" if entry is None else {CAStatus.TRUSTED: "Trusted",
                                               CAStatus.UNTRUSTED: "Untrusted"}[entry.status]
        self._record(action, got)
        self._assert(f"trust status of {action['ca']}", got == action["status"],
                     f"expected {action['status']}, got {got}")

    # -- driving the chain -----------------------------------------------

    def produce(self) -> None:
        result = self.chain.produce(self.chain.tip.timestamp + self.cfg.block_time)
        number = result.block.header.number
        included = {tx.tx_hash for tx in result.block.transactions}
        dropped = dict(result.dropped)
        for h in list(self._pending):
            if h in included or h in dropped:
                action, outcome = self._pending.pop(h)
                outcome["result"] = "ok" if h in included else f"error:{dropped[h]}"
                self._check_expect(action, outcome)
        self.client = self.client.sync_headers([result.block.header])
        if self.cfg.check_every and number % self.cfg.check_every == 0:
            self._check_invariants(number)

    def _check_invariants(self, number: int) -> None:
        for problem in invariant_violations(self.chain.state):
            self._invariant_problems.append(f"block {number}: {problem}")

    def run(self, steps: int | None = None) -> ScenarioReport:
        for action in self.cfg.actions:
            self.schedule[int(action.get("at", 1))].append(action)
        last = max([steps or 0, self.cfg.blocks, *self.schedule.keys()], default=0)
        step = 1
        while step <= last or any(k >= step for k in self.schedule):
            for action in self.schedule.pop(step, []):
                self.perform(action)
            if self.cfg.kind == "random":
                self.random_step(step)
            self.produce()
            step += 1
        self.finish()
        return self.report

    def finish(self) -> None:
        chain = self.chain
        self._check_invariants(chain.height)
        self._assert("state invariants", not self._invariant_problems,
                     "; ".join(self._invariant_problems[:5]))
        headers = chain.header_chain()
        linked = all(headers[i].parent_hash == headers[i - 1].hash and headers[i].number == i
                     for i in range(1, len(headers)))
        scheduled = all(h.proposer_id == scheduled_proposer(self.genesis, h.number)
                        for h in headers[1:])
        self._assert("forkless chain", linked and scheduled and len(headers) == chain.height + 1,
                     f"{len(headers)} headers, linked={linked}, scheduled={scheduled}")
        replayed = Chain.from_bytes(self.genesis, chain.export_bytes())
        self._assert("replay reproduces state root", replayed.state.root == chain.state.root)
        lags = [w.max_lag for w in self.watchers.values()]
        self._assert("watcher lag <= 1 block", all(lag <= 1 for lag in lags), f"max lag {max(lags, default=0)}")
        for domain, watcher in self.watchers.items():
            expected = sum(1 for ev in chain.events if watcher.matches(ev))
            self._assert(f"watcher {domain} complete", expected == len(watcher.notifications),
                         f"{len(watcher.notifications)} of {expected} events delivered")
        false_accepts = [h for h in self.report.handshakes if h.get("false_accept")]
        self._assert("no alternate-state proof accepted", not false_accepts,
                     f"{len(false_accepts)} false accepts")
        for h, (action, outcome) in self._pending.items():
            outcome["result"] = "error:NeverIncluded"
            self._check_expect(action, outcome)
        self.report.events = [e.to_dict() for e in chain.events]
        self.report.blocks = chain.height
        self.report.final_state_root = chain.state.root.hex()
        self.report.tip_hash = chain.tip.hash.hex()

    # -- randomized workload ---------------------------------------------

    def _trusted_labels(self) -> list[str]:
        entries = self.chain.state.trusted_cas().entries
        return [label for label in self.ca_labels
                if (e := entries.get(self.ca_certs[label].cert_id)) and e.status is CAStatus.TRUSTED]

    def random_step(self, step: int) -> None:
        """Schedule a random mix of operations for this step."""
        rng = self.rng
        if step == 1:
            for label in self.ca_labels[:2]:
                self.perform({"do": "add_ca", "ca": label, "expect": "ok"})
            for domain in self.cfg.domains:
                self.perform({"do": "watch", "domain": domain})
            return
        trusted = self._trusted_labels()
        labels = sorted(self.certs)
        # governance first, so later expectations can see what is in flight
        if len(trusted) > 1 and rng.random() < 0.01:
            self.perform({"do": "untrust_ca", "ca": rng.choice(trusted)})
            fresh = [c for c in self.ca_labels if c not in trusted
                     and self.ca_certs[c].cert_id not in self.chain.state.trusted_cas().entries]
            if fresh:
                self.schedule[step + 1].append({"do": "add_ca", "ca": fresh[0]})
        if len(trusted) > 1 and rng.random() < 0.02:
            self._schedule_fraud(step, trusted)
        cascading = any(tx.kind in (TxKind.UNTRUST_CA, TxKind.RESOLVE_FRAUD)
                        for tx in self.chain.pool.pending())
        if trusted and rng.random() < 0.4:
            label = f"r{step}"
            domain = rng.choice(self.cfg.domains)
            self.perform({"do": "issue", "cert": label, "ca": rng.choice(trusted), "domain": domain})
            if rng.random() < 0.9 and not self.busy(self.owner_keys[domain]):
                self.perform({"do": "add_cert", "cert": label})
        if labels and rng.random() < 0.15:
            label = rng.choice(labels)
            info = self.certs[label]
            signer = rng.choice(["holder", "holder", "issuer", "unrelated"])
            if not self.busy(self.account_key(info.holder)):
                action = {"do": "revoke", "cert": label, "signer": signer}
                rec = self.chain.state.cert_record(info.cert.cert_id)
                live = (rec is not None and rec.status is CertStatus.NOT_REVOKED
                        and self.now <= info.cert.not_after)
                if signer == "unrelated" and live and label not in self._revoking and not cascading:
                    action["expect"] = "error:UnauthorizedRevoker"
                if signer != "unrelated":
                    self._revoking.add(label)
                self.perform(action)
        if rng.random() < 0.2:
            src, dst = rng.choice(self.cfg.domains), rng.choice(self.cfg.domains + ["new"])
            if not self.busy(self.owner_keys[src]):
                balance = self.chain.state.balance(self.owner_keys[src].address)
                # incoming transfers within one block total at most a few hundred
                amount = rng.choice([0, rng.randint(1, 50), balance + 10_000])
                action = {"do": "transfer", "from": f"owner:{src}",
                          "to": f"new:{step}" if dst == "new" else f"owner:{dst}", "amount": amount}
                if amount > balance:
                    action["expect"] = "error:InsufficientBalance"
                self.perform(action)
        if labels and rng.random() < 0.4:
            label = rng.choice(labels)
            domain = rng.choice([self.certs[label].cert.subject_alternative_names[0],
                                 rng.choice(self.cfg.domains)])
            self.perform({"do": "handshake", "cert": label, "domain": domain, "expect": "oracle"})
        if labels and rng.random() < 0.05:
            self.perform({"do": "split_world", "cert": rng.choice(labels), "victims": 1})

    def _schedule_fraud(self, step: int, trusted: list[str]) -> None:
        live = [label for label, info in sorted(self.certs.items())
                if info.holder.startswith("owner:") and info.ca in trusted
                and (rec := self.chain.state.cert_record(info.cert.cert_id))
                and rec.status is CertStatus.NOT_REVOKED]
        if not live:
            return
        genuine = self.rng.choice(live)
        info = self.certs[genuine]
        rogue = self.rng.choice([c for c in trusted if c != info.ca])
        fake = f"fake{step}"
        domain = info.cert.subject_alternative_names[0]
        self.perform({"do": "issue", "cert": fake, "ca": rogue, "domain": domain, "holder": "adversary"})
        self.perform({"do": "add_cert", "cert": fake})
        report_index = (len(self.chain.state.fraud_reports().reports)
                        + sum(1 for tx in self.chain.pool.pending() if tx.kind is TxKind.REPORT_FRAUD)
                        + sum(1 for a in self.schedule.get(step + 1, []) if a["do"] == "report"))
        verdict = self.rng.choice(["Upheld", "Dismissed"])
        self.schedule[step + 1].append({"do": "report", "fake": fake, "genuine": genuine})
        self.schedule[step + 2].append({"do": "plead", "report": report_index, "ca": rogue})
        self.schedule[step + 3].append({"do": "resolve", "report": report_index, "verdict": verdict})


# ---------------------------------------------------------------------------
# built-in scenarios


def split_world_actions(cfg: ScenarioConfig) -> list[dict]:
    """Honest CA ca0 certifies the victim domain; corrupted CA ca1 issues a fake."""
    domain = cfg.domains[0]
    victims = cfg.victims
    return [
        {"at": 1, "do": "add_ca", "ca": "ca0", "expect": "ok"},
        {"at": 1, "do": "add_ca", "ca": "ca1", "expect": "ok"},
        {"at": 1, "do": "watch", "domain": domain},
        {"at": 2, "do": "issue", "cert": "genuine", "ca": "ca0", "domain": domain},
        {"at": 2, "do": "add_cert", "cert": "genuine", "expect": "ok"},
        {"at": 3, "do": "handshake", "cert": "genuine", "expect": "Accept"},
        {"at": 3, "do": "issue", "cert": "fake", "ca": "ca1", "domain": domain, "holder": "adversary"},
        {"at": 3, "do": "handshake", "cert": "fake", "expect": "Reject(AbsentFromLedger)"},
        {"at": 3, "do": "split_world", "cert": "fake", "victims": victims,
         "expect": f"{victims}/{victims} rejected Reject(ProofInvalid)"},
        {"at": 4, "do": "add_cert", "cert": "fake", "expect": "ok"},
        {"at": 5, "do": "expect_notification", "domain": domain, "kind": "CertAdded", "cert": "fake"},
        {"at": 5, "do": "handshake", "cert": "fake", "expect": "Accept"},
        {"at": 5, "do": "report", "fake": "fake", "genuine": "genuine", "expect": "ok"},
        {"at": 6, "do": "expect_notification", "domain": domain, "kind": "FraudReported", "cert": "fake"},
        {"at": 6, "do": "plead", "report": 0, "ca": "ca1", "expect": "ok"},
        {"at": 7, "do": "expect_notification", "domain": domain, "kind": "PleaAdded", "cert": "fake"},
        {"at": 7, "do": "resolve", "report": 0, "verdict": "Upheld", "expect": "ok"},
        {"at": 8, "do": "expect_ca", "ca": "ca1", "status": "Untrusted"},
        {"at": 8, "do": "expect_status", "cert": "fake", "status": "Revoked"},
        {"at": 8, "do": "expect_notification", "domain": domain, "kind": "CertRevoked", "cert": "fake"},
        {"at": 8, "do": "handshake", "cert": "fake", "expect": "Reject(Revoked)"},
        {"at": 8, "do": "handshake", "cert": "genuine", "expect": "Accept"},
        {"at": 8, "do": "split_world", "cert": "fake", "victims": victims,
         "expect": f"{victims}/{victims} rejected Reject(ProofInvalid)"},
    ]


def rogue_revocation_actions(cfg: ScenarioConfig) -> list[dict]:
    """An adversary holding one certificate's private key revokes it."""
    domain = cfg.domains[0]
    return [
        {"at": 1, "do": "add_ca", "ca": "ca0", "expect": "ok"},
        {"at": 1, "do": "watch", "domain": domain},
        {"at": 2, "do": "issue", "cert": "compromised", "ca": "ca0", "domain": domain},
        {"at": 2, "do": "issue", "cert": "spare", "ca": "ca0", "domain": domain},
        {"at": 2, "do": "add_cert", "cert": "compromised", "expect": "ok"},
        {"at": 2, "do": "add_cert", "cert": "spare", "by": "ca", "expect": "ok"},
        {"at": 3, "do": "handshake", "cert": "compromised", "expect": "Accept"},
        {"at": 3, "do": "revoke", "cert": "spare", "signer": "unrelated", "by": "adversary",
         "expect": "error:UnauthorizedRevoker"},
        {"at": 4, "do": "revoke", "cert": "compromised", "signer": "holder", "by": "adversary",
         "expect": "ok"},
        {"at": 5, "do": "expect_notification", "domain": domain, "kind": "CertRevoked",
         "cert": "compromised", "within": 0},
        {"at": 5, "do": "expect_status", "cert": "compromised", "status": "Revoked"},
        {"at": 5, "do": "handshake", "cert": "compromised", "expect": "Reject(Revoked)"},
        {"at": 5, "do": "handshake", "cert": "spare", "expect": "Accept"},
    ]


def random_config(seed: int, blocks: int = 1000, domains: int = 8, cas: int = 5) -> ScenarioConfig:
    return ScenarioConfig(
        name=f"random-{seed}", kind="random", seed=seed, blocks=blocks, cas=cas,
        domains=[f"site{i}.example" for i in range(domains)], check_every=50,
    )


def run_simulation(config: ScenarioConfig) -> Simulation:
    """Run ``config`` and return the finished simulation (chain, watchers, report).

    Built-in kinds prepend their scripted actions.
    """
    config.validate()
    if config.kind == "split-world":
        config = ScenarioConfig(**{**asdict(config), "actions": split_world_actions(config) + config.actions})
    elif config.kind == "rogue-revocation":
        config = ScenarioConfig(**{**asdict(config),
                                   "actions": rogue_revocation_actions(config) + config.actions})
    sim = Simulation(config)
    sim.run()
    return sim


def run_scenario(config: ScenarioConfig) -> ScenarioReport:
    return run_simulation(config).report


def attack_split_world(config: ScenarioConfig) -> ScenarioReport:
    return run_scenario(ScenarioConfig(**{**asdict(config), "kind": "split-world"}))


def attack_rogue_revocation(config: ScenarioConfig) -> ScenarioReport:
    return run_scenario(ScenarioConfig(**{**asdict(config), "kind": "rogue-revocation"}))
