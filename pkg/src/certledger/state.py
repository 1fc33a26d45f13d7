"""State objects and their transition rules.

The world state is a single :class:`~certledger.trie.StateTrie`. Each record
lives at a 32-byte address and starts with a one-byte kind tag:

==========  =======================================  ==========================
tag         record                                   address
==========  =======================================  ==========================
1           TrustedCAsState (singleton)              sha256("certledger/state/trusted-cas")
2           DomainState (per DNS name index)         sha256("domain:" + name)
3           CertRecord (one per TLS certificate)     sha256("certificate:" + cert_id)
4           AccountState                             sha256("account:" + public key)
5           TokenState (singleton)                   sha256("certledger/state/token")
6           FraudReportState (singleton)             sha256("certledger/state/fraud-reports")
7           IssuerIndex (per CA)                     sha256("issued:" + ca cert_id)
==========  =======================================  ==========================

A domain's certificates are held as one :class:`CertRecord` per certificate
plus a :class:`DomainState` listing their ids, so a light client only needs
a proof for the record it is shown.

Transactions are applied by :func:`apply_transaction`, which is atomic: on
any :class:`TransactionError` the input state is returned untouched.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Iterable, Iterator

from .cert import (
    Certificate,
    build_trusted_path,
    read_certificate,
    encode_certificate,
    validate_ca_profile,
    validate_tls_profile,
    verify_signature,
)
from .codec import DecodeError, Reader, Writer
from .crypto import KeyPair, address_of, sha256, verify
from .trie import StateTrie

TRUSTED_CAS_ADDRESS = sha256(b"certledger/state/trusted-cas")
TOKEN_ADDRESS = sha256(b"certledger/state/token")
FRAUD_REPORTS_ADDRESS = sha256(b"certledger/state/fraud-reports")
BOARD_ACCOUNT = sha256(b"certledger/board-account")


def domain_address(name: str) -> bytes:
    return sha256(b"domain:", name.lower().encode("ascii"))


def cert_address(cert_id: bytes) -> bytes:
    return sha256(b"certificate:", cert_id)


def issuer_index_address(ca_id: bytes) -> bytes:
    return sha256(b"issued:", ca_id)


class TxKind(enum.IntEnum):
    ADD_TRUSTED_CA = 1
    UNTRUST_CA = 2
    ADD_TLS_CERT = 3
    REVOKE_CERT = 4
    REPORT_FRAUD = 5
    PLEAD_FRAUD = 6
    TRANSFER_TOKEN = 7
    RESOLVE_FRAUD = 8


GOVERNANCE_KINDS = frozenset({TxKind.ADD_TRUSTED_CA, TxKind.UNTRUST_CA, TxKind.RESOLVE_FRAUD})

DEFAULT_FEES = {kind: 1 for kind in TxKind} | {TxKind.TRANSFER_TOKEN: 0}


class CAStatus(enum.IntEnum):
    TRUSTED = 1
    UNTRUSTED = 2


class CertStatus(enum.IntEnum):
    NOT_REVOKED = 1
    REVOKED = 2


class Resolution(enum.IntEnum):
    OPEN = 0
    DISMISSED = 1
    UPHELD = 2


class EventKind(enum.Enum):
    CERT_ADDED = "CertAdded"
    CERT_REVOKED = "CertRevoked"
    CA_TRUSTED = "CATrusted"
    CA_UNTRUSTED = "CAUntrusted"
    FRAUD_REPORTED = "FraudReported"
    PLEA_ADDED = "PleaAdded"
    FRAUD_RESOLVED = "FraudResolved"


class TransactionError(Exception):
    """A transaction was rejected; ``code`` is a stable CamelCase category."""

    def __init__(self, code: str, detail: str = "") -> None:
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


# ---------------------------------------------------------------------------
# records


class RecordKind(enum.IntEnum):
    TRUSTED_CAS = 1
    DOMAIN = 2
    CERTIFICATE = 3
    ACCOUNT = 4
    TOKEN = 5
    FRAUD_REPORTS = 6
    ISSUER_INDEX = 7


def _write_cert(w: Writer, cert: Certificate) -> None:
    w.bytes32(encode_certificate(cert))


def _read_cert(r: Reader) -> Certificate:
    inner = Reader(r.bytes32())
    cert = read_certificate(inner)
    inner.done()
    return cert


def _write_opt_u64(w: Writer, v: int | None) -> None:
    if v is None:
        w.u8(0)
    else:
        w.u8(1).u64(v)


def _read_opt_u64(r: Reader) -> int | None:
    return r.u64() if r.flag() else None


@dataclass
class CAEntry:
    certificate: Certificate
    status: CAStatus
    account: bytes
    added_at_block: int


@dataclass
class TrustedCAsState:
    board_keys: tuple[bytes, ...]
    threshold: int
    entries: dict[bytes, CAEntry] = field(default_factory=dict)

    kind = RecordKind.TRUSTED_CAS

    def trusted(self) -> list[Certificate]:
        return [e.certificate for e in self.entries.values() if e.status is CAStatus.TRUSTED]

    def encode(self) -> bytes:
        w = Writer().u8(self.kind).u16(self.threshold).u16(len(self.board_keys))
        for key in self.board_keys:
            w.bytes8(key)
        w.u32(len(self.entries))
        for cid in sorted(self.entries):
            e = self.entries[cid]
            _write_cert(w, e.certificate)
            w.u8(e.status).fixed(e.account, 32).u64(e.added_at_block)
        return w.getvalue()

    @classmethod
    def read(cls, r: Reader) -> "TrustedCAsState":
        threshold = r.u16()
        keys = tuple(r.bytes8() for _ in range(r.u16()))
        entries = {}
        for _ in range(r.u32()):
            cert = _read_cert(r)
            entries[cert.cert_id] = CAEntry(cert, CAStatus(r.u8()), r.take(32), r.u64())
        return cls(keys, threshold, entries)


@dataclass
class DomainState:
    domain: str
    cert_ids: list[bytes] = field(default_factory=list)

    kind = RecordKind.DOMAIN

    def encode(self) -> bytes:
        w = Writer().u8(self.kind).str16(self.domain).u32(len(self.cert_ids))
        for cid in self.cert_ids:
            w.fixed(cid, 32)
        return w.getvalue()

    @classmethod
    def read(cls, r: Reader) -> "DomainState":
        domain = r.str16()
        return cls(domain, [r.take(32) for _ in range(r.u32())])


@dataclass
class CertRecord:
    certificate: Certificate
    status: CertStatus
    added_at_block: int
    revoked_at_block: int | None = None

    kind = RecordKind.CERTIFICATE

    @property
    def cert_id(self) -> bytes:
        return self.certificate.cert_id

    def encode(self) -> bytes:
        w = Writer().u8(self.kind)
        _write_cert(w, self.certificate)
        w.u8(self.status).u64(self.added_at_block)
        _write_opt_u64(w, self.revoked_at_block)
        return w.getvalue()

    @classmethod
    def read(cls, r: Reader) -> "CertRecord":
        cert = _read_cert(r)
        return cls(cert, CertStatus(r.u8()), r.u64(), _read_opt_u64(r))


@dataclass
class AccountState:
    owner_key: bytes
    balance: int = 0
    nonce: int = 0

    kind = RecordKind.ACCOUNT

    def encode(self) -> bytes:
        return Writer().u8(self.kind).bytes8(self.owner_key).u64(self.balance).u64(self.nonce).getvalue()

    @classmethod
    def read(cls, r: Reader) -> "AccountState":
        return cls(r.bytes8(), r.u64(), r.u64())


@dataclass
class TokenState:
    total_supply: int
    fee_schedule: dict[TxKind, int]
    foundation_account: bytes
    board_account: bytes

    kind = RecordKind.TOKEN

    def fee(self, kind: TxKind) -> int:
        return self.fee_schedule.get(kind, 0)

    def encode(self) -> bytes:
        w = Writer().u8(self.kind).u64(self.total_supply).u8(len(self.fee_schedule))
        for k in sorted(self.fee_schedule):
            w.u8(k).u64(self.fee_schedule[k])
        return w.fixed(self.foundation_account, 32).fixed(self.board_account, 32).getvalue()

    @classmethod
    def read(cls, r: Reader) -> "TokenState":
        supply = r.u64()
        fees = {TxKind(r.u8()): r.u64() for _ in range(r.u8())}
        return cls(supply, fees, r.take(32), r.take(32))


@dataclass
class Plea:
    document_hash: bytes
    ca_signature: bytes
    filed_at_block: int


@dataclass
class FraudReport:
    fake_cert: Certificate
    genuine_cert_id: bytes
    reporter: bytes
    evidence_sig: bytes
    filed_at_block: int
    plea: Plea | None = None
    resolution: Resolution = Resolution.OPEN

    @property
    def issuer_id(self) -> bytes:
        return self.fake_cert.issuer_id

    def write(self, w: Writer) -> None:
        _write_cert(w, self.fake_cert)
        w.fixed(self.genuine_cert_id, 32).fixed(self.reporter, 32)
        w.bytes8(self.evidence_sig).u64(self.filed_at_block)
        if self.plea is None:
            w.u8(0)
        else:
            w.u8(1).fixed(self.plea.document_hash, 32).bytes8(self.plea.ca_signature)
            w.u64(self.plea.filed_at_block)
        w.u8(self.resolution)

    @classmethod
    def read(cls, r: Reader) -> "FraudReport":
        fake = _read_cert(r)
        genuine, reporter = r.take(32), r.take(32)
        evidence, filed = r.bytes8(), r.u64()
        plea = Plea(r.take(32), r.bytes8(), r.u64()) if r.flag() else None
        return cls(fake, genuine, reporter, evidence, filed, plea, Resolution(r.u8()))


@dataclass
class FraudReportState:
    reports: list[FraudReport] = field(default_factory=list)

    kind = RecordKind.FRAUD_REPORTS

    def encode(self) -> bytes:
        w = Writer().u8(self.kind).u32(len(self.reports))
        for rep in self.reports:
            rep.write(w)
        return w.getvalue()

    @classmethod
    def read(cls, r: Reader) -> "FraudReportState":
        return cls([FraudReport.read(r) for _ in range(r.u32())])


@dataclass
class IssuerIndex:
    ca_id: bytes
    cert_ids: list[bytes] = field(default_factory=list)

    kind = RecordKind.ISSUER_INDEX

    def encode(self) -> bytes:
        w = Writer().u8(self.kind).fixed(self.ca_id, 32).u32(len(self.cert_ids))
        for cid in self.cert_ids:
            w.fixed(cid, 32)
        return w.getvalue()

    @classmethod
    def read(cls, r: Reader) -> "IssuerIndex":
        ca_id = r.take(32)
        return cls(ca_id, [r.take(32) for _ in range(r.u32())])


_RECORD_TYPES = {
    cls.kind: cls
    for cls in (TrustedCAsState, DomainState, CertRecord, AccountState, TokenState,
                FraudReportState, IssuerIndex)
}


def decode_record(data: bytes):
    r = Reader(data)
    try:
        cls = _RECORD_TYPES[RecordKind(r.u8())]
    except ValueError:
        raise DecodeError("unknown record kind") from None
    try:
        record = cls.read(r)
    except ValueError as exc:
        raise DecodeError(str(exc)) from None
    r.done()
    return record


# ---------------------------------------------------------------------------
# transactions and payloads


def revocation_message(cert_id: bytes) -> bytes:
    return sha256(b"certledger/revoke", cert_id)


def evidence_message(fake_cert_id: bytes, reporter: bytes) -> bytes:
    return sha256(b"certledger/fraud-evidence", fake_cert_id, reporter)


def plea_message(report: int, document_hash: bytes) -> bytes:
    return sha256(b"certledger/plea", report.to_bytes(4, "big"), document_hash)


@dataclass(frozen=True)
class AddTrustedCA:
    certificate: Certificate
    kind = TxKind.ADD_TRUSTED_CA

    def encode(self) -> bytes:
        return encode_certificate(self.certificate)

    @classmethod
    def read(cls, r: Reader) -> "AddTrustedCA":
        return cls(read_certificate(r))


@dataclass(frozen=True)
class UntrustCA:
    ca_id: bytes
    kind = TxKind.UNTRUST_CA

    def encode(self) -> bytes:
        return self.ca_id

    @classmethod
    def read(cls, r: Reader) -> "UntrustCA":
        return cls(r.take(32))


@dataclass(frozen=True)
class AddTLSCert:
    certificate: Certificate
    kind = TxKind.ADD_TLS_CERT

    def encode(self) -> bytes:
        return encode_certificate(self.certificate)

    @classmethod
    def read(cls, r: Reader) -> "AddTLSCert":
        return cls(read_certificate(r))


@dataclass(frozen=True)
class RevokeCert:
    cert_id: bytes
    signature: bytes
    kind = TxKind.REVOKE_CERT

    def encode(self) -> bytes:
        return Writer().fixed(self.cert_id, 32).bytes8(self.signature).getvalue()

    @classmethod
    def read(cls, r: Reader) -> "RevokeCert":
        return cls(r.take(32), r.bytes8())


@dataclass(frozen=True)
class ReportFraud:
    fake_cert_id: bytes
    genuine_cert_id: bytes
    evidence_sig: bytes
    kind = TxKind.REPORT_FRAUD

    def encode(self) -> bytes:
        w = Writer().fixed(self.fake_cert_id, 32).fixed(self.genuine_cert_id, 32)
        return w.bytes8(self.evidence_sig).getvalue()

    @classmethod
    def read(cls, r: Reader) -> "ReportFraud":
        return cls(r.take(32), r.take(32), r.bytes8())


@dataclass(frozen=True)
class PleadFraud:
    report: int
    document_hash: bytes
    signature: bytes
    kind = TxKind.PLEAD_FRAUD

    def encode(self) -> bytes:
        w = Writer().u32(self.report).fixed(self.document_hash, 32)
        return w.bytes8(self.signature).getvalue()

    @classmethod
    def read(cls, r: Reader) -> "PleadFraud":
        return cls(r.u32(), r.take(32), r.bytes8())


@dataclass(frozen=True)
class ResolveFraud:
    report: int
    verdict: Resolution
    kind = TxKind.RESOLVE_FRAUD

    def encode(self) -> bytes:
        return Writer().u32(self.report).u8(self.verdict).getvalue()

    @classmethod
    def read(cls, r: Reader) -> "ResolveFraud":
        report, verdict = r.u32(), Resolution(r.u8())
        if verdict is Resolution.OPEN:
            raise DecodeError("a verdict cannot be Open")
        return cls(report, verdict)


@dataclass(frozen=True)
class TransferToken:
    recipient: bytes
    amount: int
    kind = TxKind.TRANSFER_TOKEN

    def encode(self) -> bytes:
        return Writer().fixed(self.recipient, 32).u64(self.amount).getvalue()

    @classmethod
    def read(cls, r: Reader) -> "TransferToken":
        return cls(r.take(32), r.u64())


Payload = (AddTrustedCA | UntrustCA | AddTLSCert | RevokeCert | ReportFraud
           | PleadFraud | ResolveFraud | TransferToken)

_PAYLOAD_TYPES = {
    cls.kind: cls
    for cls in (AddTrustedCA, UntrustCA, AddTLSCert, RevokeCert, ReportFraud,
                PleadFraud, ResolveFraud, TransferToken)
}


def decode_payload(kind: TxKind, data: bytes) -> Payload:
    r = Reader(data)
    try:
        body = _PAYLOAD_TYPES[kind].read(r)
    except ValueError as exc:
        raise DecodeError(str(exc)) from None
    r.done()
    return body


@dataclass(frozen=True)
class Transaction:
    """A signed state-change request.

    Canonical encoding::

        u8 kind | u8 len + sender public key | u64 nonce | u32 len + payload |
        u8 count | count x (u8 len + board key, u8 len + board signature) |
        u8 len + sender signature

    Both the sender and board members sign :meth:`digest`, which covers the
    sender address, nonce, kind and payload.
    """

    sender_key: bytes
    nonce: int
    kind: TxKind
    payload: bytes
    board_signatures: tuple[tuple[bytes, bytes], ...] = ()
    sender_signature: bytes = b""

    @property
    def sender(self) -> bytes:
        return address_of(self.sender_key)

    def digest(self) -> bytes:
        w = Writer().raw(b"certledger/tx").fixed(self.sender, 32).u64(self.nonce)
        return sha256(w.u8(self.kind).bytes32(self.payload).getvalue())

    def encode(self) -> bytes:
        w = Writer().u8(self.kind).bytes8(self.sender_key).u64(self.nonce).bytes32(self.payload)
        w.u8(len(self.board_signatures))
        for key, sig in self.board_signatures:
            w.bytes8(key).bytes8(sig)
        return w.bytes8(self.sender_signature).getvalue()

    @classmethod
    def read(cls, r: Reader) -> "Transaction":
        try:
            kind = TxKind(r.u8())
        except ValueError:
            raise DecodeError("unknown transaction kind") from None
        key, nonce, payload = r.bytes8(), r.u64(), r.bytes32()
        board = tuple((r.bytes8(), r.bytes8()) for _ in range(r.u8()))
        return cls(key, nonce, kind, payload, board, r.bytes8())

    @classmethod
    def decode(cls, data: bytes) -> "Transaction":
        r = Reader(data)
        tx = cls.read(r)
        r.done()
        return tx

    @cached_property
    def tx_hash(self) -> bytes:
        return sha256(self.encode())

    def body(self) -> Payload:
        return decode_payload(self.kind, self.payload)

    @classmethod
    def create(
        cls,
        sender: KeyPair,
        nonce: int,
        body: Payload,
        board: Iterable[KeyPair] = (),
    ) -> "Transaction":
        """Build a transaction and sign it with ``sender`` and each board key."""
        unsigned = cls(sender.public, nonce, body.kind, body.encode())
        digest = unsigned.digest()
        sigs = tuple((k.public, k.sign(digest)) for k in board)
        return replace(unsigned, board_signatures=sigs, sender_signature=sender.sign(digest))

    def with_board_signatures(self, sigs: Iterable[tuple[bytes, bytes]]) -> "Transaction":
        return replace(self, board_signatures=tuple(sigs))


@dataclass(frozen=True)
class Event:
    block_number: int
    index: int
    kind: EventKind
    cert_id: bytes | None = None
    ca_id: bytes | None = None
    domains: tuple[str, ...] = ()
    report: int | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "block": self.block_number,
            "index": self.index,
            "kind": self.kind.value,
            "cert_id": self.cert_id.hex() if self.cert_id else None,
            "ca_id": self.ca_id.hex() if self.ca_id else None,
            "domains": list(self.domains),
            "report": self.report,
            "detail": self.detail,
        }

    def to_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Event":
        return cls(
            d["block"], d["index"], EventKind(d["kind"]),
            bytes.fromhex(d["cert_id"]) if d.get("cert_id") else None,
            bytes.fromhex(d["ca_id"]) if d.get("ca_id") else None,
            tuple(d.get("domains", ())), d.get("report"), d.get("detail", ""),
        )


# ---------------------------------------------------------------------------
# world state


@dataclass(frozen=True)
class GenesisConfig:
    """Everything needed to build block 0 and its state."""

    board_keys: tuple[bytes, ...]
    threshold: int
    foundation_key: bytes
    total_supply: int = 10**9
    fee_schedule: dict[TxKind, int] = field(default_factory=lambda: dict(DEFAULT_FEES))
    allocations: dict[bytes, int] = field(default_factory=dict)
    authorities: tuple[bytes, ...] = (bytes(32),)
    timestamp: int = 1_700_000_000

    def __post_init__(self) -> None:
        if not 1 <= self.threshold <= len(self.board_keys):
            raise ValueError("threshold must satisfy 1 <= t <= n")
        if len(set(self.board_keys)) != len(self.board_keys):
            raise ValueError("board keys must be distinct")
        if sum(self.allocations.values()) > self.total_supply:
            raise ValueError("allocations exceed total supply")
        for kind, fee in self.fee_schedule.items():
            if fee < 0 or (fee == 0 and kind is not TxKind.TRANSFER_TOKEN):
                raise ValueError(f"fee for {kind.name} must be positive")
        if not self.authorities:
            raise ValueError("at least one block authority is required")

    def to_json(self) -> str:
        return json.dumps({
            "board_keys": [k.hex() for k in self.board_keys],
            "threshold": self.threshold,
            "foundation_key": self.foundation_key.hex(),
            "total_supply": self.total_supply,
            "fee_schedule": {k.name: v for k, v in sorted(self.fee_schedule.items())},
            "allocations": {k.hex(): v for k, v in sorted(self.allocations.items())},
            "authorities": [a.hex() for a in self.authorities],
            "timestamp": self.timestamp,
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GenesisConfig":
        d = json.loads(text)
        fees = dict(DEFAULT_FEES)
        fees.update({TxKind[k]: int(v) for k, v in d.get("fee_schedule", {}).items()})
        return cls(
            board_keys=tuple(bytes.fromhex(k) for k in d["board_keys"]),
            threshold=int(d["threshold"]),
            foundation_key=bytes.fromhex(d["foundation_key"]),
            total_supply=int(d.get("total_supply", 10**9)),
            fee_schedule=fees,
            allocations={bytes.fromhex(k): int(v) for k, v in d.get("allocations", {}).items()},
            authorities=tuple(bytes.fromhex(a) for a in d.get("authorities", ["00" * 32])),
            timestamp=int(d.get("timestamp", 1_700_000_000)),
        )


class WorldState:
    """Immutable view of all state objects at one point in the chain."""

    __slots__ = ("trie",)

    def __init__(self, trie: StateTrie) -> None:
        self.trie = trie

    @property
    def root(self) -> bytes:
        return self.trie.root_hash

    def __repr__(self) -> str:
        return f"WorldState(root={self.root.hex()[:16]}...)"

    @classmethod
    def genesis(cls, config: GenesisConfig) -> "WorldState":
        foundation = address_of(config.foundation_key)
        records: dict[bytes, object] = {
            TRUSTED_CAS_ADDRESS: TrustedCAsState(config.board_keys, config.threshold),
            TOKEN_ADDRESS: TokenState(config.total_supply, dict(config.fee_schedule),
                                      foundation, BOARD_ACCOUNT),
            FRAUD_REPORTS_ADDRESS: FraudReportState(),
            BOARD_ACCOUNT: AccountState(b""),
        }
        remaining = config.total_supply
        for key, amount in sorted(config.allocations.items()):
            addr = address_of(key)
            acct = records.setdefault(addr, AccountState(key))
            acct.balance += amount
            remaining -= amount
        acct = records.setdefault(foundation, AccountState(config.foundation_key))
        acct.balance += remaining
        trie = StateTrie()
        for addr in sorted(records):
            trie = trie.insert(addr, records[addr].encode())
        return cls(trie)

    def read(self, address: bytes):
        raw = self.trie.get(address)
        return None if raw is None else decode_record(raw)

    def trusted_cas(self) -> TrustedCAsState:
        return self.read(TRUSTED_CAS_ADDRESS)

    def token(self) -> TokenState:
        return self.read(TOKEN_ADDRESS)

    def fraud_reports(self) -> FraudReportState:
        return self.read(FRAUD_REPORTS_ADDRESS)

    def account(self, address: bytes) -> AccountState | None:
        return self.read(address)

    def balance(self, address: bytes) -> int:
        acct = self.account(address)
        return acct.balance if acct else 0

    def domain(self, name: str) -> DomainState | None:
        return self.read(domain_address(name))

    def cert_record(self, cert_id: bytes) -> CertRecord | None:
        return self.read(cert_address(cert_id))

    def records(self) -> Iterator[tuple[bytes, object]]:
        for addr, raw in self.trie.items():
            yield addr, decode_record(raw)

    def accounts(self) -> Iterator[tuple[bytes, AccountState]]:
        for addr, rec in self.records():
            if isinstance(rec, AccountState):
                yield addr, rec

    def total_balance(self) -> int:
        return sum(a.balance for _, a in self.accounts())


class _Working:
    """Mutable overlay over a WorldState; nothing touches the trie until commit."""

    def __init__(self, base: WorldState) -> None:
        self.base = base
        self.cache: dict[bytes, object] = {}
        self.dirty: set[bytes] = set()

    def get(self, address: bytes):
        if address not in self.cache:
            self.cache[address] = self.base.read(address)
        return self.cache[address]

    def put(self, address: bytes, record) -> None:
        self.cache[address] = record
        self.dirty.add(address)

    def touch(self, address: bytes) -> None:
        self.dirty.add(address)

    def account(self, address: bytes, create: bool = False) -> AccountState | None:
        acct = self.get(address)
        if acct is None and create:
            acct = AccountState(b"")
            self.put(address, acct)
        if acct is not None and not isinstance(acct, AccountState):
            raise TransactionError("NotAnAccount", address.hex())
        return acct

    def commit(self) -> WorldState:
        trie = self.base.trie
        for addr in sorted(self.dirty):
            trie = trie.insert(addr, self.cache[addr].encode())
        return WorldState(trie)


# ---------------------------------------------------------------------------
# transition rules


@dataclass
class _Ctx:
    w: _Working
    tx: Transaction
    now: int
    block: int
    events: list[Event] = field(default_factory=list)

    @property
    def token(self) -> TokenState:
        return self.w.get(TOKEN_ADDRESS)

    @property
    def cas(self) -> TrustedCAsState:
        return self.w.get(TRUSTED_CAS_ADDRESS)

    def emit(self, kind: EventKind, **kw) -> None:
        self.events.append(Event(self.block, len(self.events), kind, **kw))

    def move(self, src: bytes, dst: bytes, amount: int) -> None:
        payer = self.w.account(src)
        if payer is None or payer.balance < amount:
            raise TransactionError("InsufficientBalance", f"need {amount}")
        self.w.touch(src)
        payer.balance -= amount
        self.w.account(dst, create=True).balance += amount
        self.w.touch(dst)

    def charge_fee(self, payee: bytes) -> None:
        self.move(self.tx.sender, payee, self.token.fee(self.tx.kind))


def board_approvals(tx: Transaction, board_keys: Iterable[bytes]) -> set[bytes]:
    """Distinct board keys holding a valid signature over the tx digest."""
    board = set(board_keys)
    digest = tx.digest()
    return {key for key, sig in tx.board_signatures if key in board and verify(key, sig, digest)}


def _require_board(ctx: _Ctx) -> None:
    cas = ctx.cas
    got = len(board_approvals(ctx.tx, cas.board_keys))
    if got < cas.threshold:
        raise TransactionError("BelowThreshold", f"{got} of {cas.threshold} board signatures")


def _add_trusted_ca(ctx: _Ctx, body: AddTrustedCA) -> None:
    _require_board(ctx)
    cert = body.certificate
    cas = ctx.cas
    if cert.cert_id in cas.entries:
        raise TransactionError("DuplicateCA", cert.cert_id.hex())
    outcome = validate_ca_profile(cert, ctx.now)
    if not outcome.ok:
        raise TransactionError(outcome.verdict.value, outcome.detail)
    if not cert.self_signed or not verify_signature(cert, cert.public_key):
        raise TransactionError("ProfileViolation", "CA certificate must be validly self-signed")
    ctx.charge_fee(ctx.token.board_account)
    cas.entries[cert.cert_id] = CAEntry(cert, CAStatus.TRUSTED, ctx.tx.sender, ctx.block)
    ctx.w.touch(TRUSTED_CAS_ADDRESS)
    ctx.emit(EventKind.CA_TRUSTED, ca_id=cert.cert_id,
             detail=cert.subject_common_name)


def _revoke_record(ctx: _Ctx, rec: CertRecord) -> None:
    rec.status = CertStatus.REVOKED
    rec.revoked_at_block = ctx.block
    ctx.w.touch(cert_address(rec.cert_id))
    ctx.emit(EventKind.CERT_REVOKED, cert_id=rec.cert_id, ca_id=rec.certificate.issuer_id,
             domains=rec.certificate.subject_alternative_names)


def _untrust(ctx: _Ctx, ca_id: bytes) -> None:
    entry = ctx.cas.entries[ca_id]
    entry.status = CAStatus.UNTRUSTED
    ctx.w.touch(TRUSTED_CAS_ADDRESS)
    ctx.emit(EventKind.CA_UNTRUSTED, ca_id=ca_id, detail=entry.certificate.subject_common_name)
    index = ctx.w.get(issuer_index_address(ca_id))
    for cid in index.cert_ids if index else ():
        rec = ctx.w.get(cert_address(cid))
        if rec.status is CertStatus.NOT_REVOKED:
            _revoke_record(ctx, rec)
    # the untrusted CA pays what it can; an empty account must not block the untrust
    acct = ctx.w.account(entry.account)
    fee = min(ctx.token.fee(TxKind.UNTRUST_CA), acct.balance if acct else 0)
    if fee:
        ctx.move(entry.account, ctx.token.board_account, fee)


def _untrust_ca(ctx: _Ctx, body: UntrustCA) -> None:
    _require_board(ctx)
    entry = ctx.cas.entries.get(body.ca_id)
    if entry is None:
        raise TransactionError("UnknownCA", body.ca_id.hex())
    if entry.status is CAStatus.UNTRUSTED:
        raise TransactionError("AlreadyUntrusted", body.ca_id.hex())
    if ctx.now > entry.certificate.not_after:
        raise TransactionError("ExpiredCA", body.ca_id.hex())
    _untrust(ctx, body.ca_id)


def _add_tls_cert(ctx: _Ctx, body: AddTLSCert) -> None:
    cert = body.certificate
    cid = cert.cert_id
    if ctx.w.get(cert_address(cid)) is not None:
        raise TransactionError("Duplicate", cid.hex())
    outcome = validate_tls_profile(cert, ctx.now)
    if not outcome.ok:
        raise TransactionError(outcome.verdict.value, outcome.detail)
    path = build_trusted_path(cert, ctx.cas.trusted())
    if not isinstance(path, Certificate):
        raise TransactionError(path.verdict.value, path.detail)
    ctx.charge_fee(ctx.token.foundation_account)
    ctx.w.put(cert_address(cid), CertRecord(cert, CertStatus.NOT_REVOKED, ctx.block))
    for name in sorted({n.lower() for n in cert.subject_alternative_names}):
        addr = domain_address(name)
        dom = ctx.w.get(addr) or DomainState(name)
        dom.cert_ids.append(cid)
        ctx.w.put(addr, dom)
    iaddr = issuer_index_address(path.cert_id)
    index = ctx.w.get(iaddr) or IssuerIndex(path.cert_id)
    index.cert_ids.append(cid)
    ctx.w.put(iaddr, index)
    ctx.emit(EventKind.CERT_ADDED, cert_id=cid, ca_id=path.cert_id,
             domains=cert.subject_alternative_names)


def _revoke_cert(ctx: _Ctx, body: RevokeCert) -> None:
    rec: CertRecord | None = ctx.w.get(cert_address(body.cert_id))
    if rec is None:
        raise TransactionError("UnknownCert", body.cert_id.hex())
    if rec.status is CertStatus.REVOKED:
        raise TransactionError("AlreadyRevoked", body.cert_id.hex())
    if ctx.now > rec.certificate.not_after:
        raise TransactionError("CertExpired", body.cert_id.hex())
    msg = revocation_message(body.cert_id)
    signers = [rec.certificate.public_key]
    issuer = ctx.cas.entries.get(rec.certificate.issuer_id)
    if issuer is not None:
        signers.append(issuer.certificate.public_key)
    if not any(verify(k, body.signature, msg) for k in signers):
        raise TransactionError("UnauthorizedRevoker", "signed by neither the certificate nor its issuer")
    ctx.charge_fee(ctx.token.foundation_account)
    _revoke_record(ctx, rec)


def _live(rec: CertRecord | None, now: int) -> bool:
    return (rec is not None and rec.status is CertStatus.NOT_REVOKED
            and rec.certificate.not_before <= now <= rec.certificate.not_after)


def _report_fraud(ctx: _Ctx, body: ReportFraud) -> None:
    fake: CertRecord | None = ctx.w.get(cert_address(body.fake_cert_id))
    if fake is None:
        raise TransactionError("FakeCertNotInLedger", body.fake_cert_id.hex())
    genuine: CertRecord | None = ctx.w.get(cert_address(body.genuine_cert_id))
    if body.genuine_cert_id == body.fake_cert_id or not _live(genuine, ctx.now):
        raise TransactionError("GenuineCertInvalid", body.genuine_cert_id.hex())
    shared = ({n.lower() for n in fake.certificate.subject_alternative_names}
              & {n.lower() for n in genuine.certificate.subject_alternative_names})
    if not shared:
        raise TransactionError("SANMismatch", "certificates share no subject alternative name")
    msg = evidence_message(body.fake_cert_id, ctx.tx.sender)
    if not verify(genuine.certificate.public_key, body.evidence_sig, msg):
        raise TransactionError("BadEvidenceSignature")
    reports: FraudReportState = ctx.w.get(FRAUD_REPORTS_ADDRESS)
    for rep in reports.reports:
        if rep.fake_cert.cert_id == body.fake_cert_id and rep.resolution is Resolution.OPEN:
            raise TransactionError("AlreadyReported", body.fake_cert_id.hex())
    ctx.charge_fee(ctx.token.board_account)
    reports.reports.append(FraudReport(fake.certificate, body.genuine_cert_id, ctx.tx.sender,
                                       body.evidence_sig, ctx.block))
    ctx.w.touch(FRAUD_REPORTS_ADDRESS)
    ctx.emit(EventKind.FRAUD_REPORTED, cert_id=body.fake_cert_id,
             ca_id=fake.certificate.issuer_id, domains=tuple(sorted(shared)),
             report=len(reports.reports) - 1)


def _get_report(ctx: _Ctx, index: int) -> FraudReport:
    reports: FraudReportState = ctx.w.get(FRAUD_REPORTS_ADDRESS)
    if index >= len(reports.reports):
        raise TransactionError("UnknownReport", str(index))
    return reports.reports[index]


def _plead_fraud(ctx: _Ctx, body: PleadFraud) -> None:
    report = _get_report(ctx, body.report)
    if report.resolution is not Resolution.OPEN:
        raise TransactionError("ReportClosed", str(body.report))
    if report.plea is not None:
        raise TransactionError("AlreadyPleaded", str(body.report))
    entry = ctx.cas.entries.get(report.issuer_id)
    if entry is None:
        raise TransactionError("CANotTrusted", report.issuer_id.hex())
    if not verify(entry.certificate.public_key, body.signature,
                  plea_message(body.report, body.document_hash)):
        raise TransactionError("NotIssuer", "plea not signed by the fake certificate's issuer")
    if entry.status is not CAStatus.TRUSTED:
        raise TransactionError("CANotTrusted", report.issuer_id.hex())
    ctx.charge_fee(ctx.token.board_account)
    report.plea = Plea(body.document_hash, body.signature, ctx.block)
    ctx.w.touch(FRAUD_REPORTS_ADDRESS)
    ctx.emit(EventKind.PLEA_ADDED, cert_id=report.fake_cert.cert_id, ca_id=report.issuer_id,
             domains=report.fake_cert.subject_alternative_names, report=body.report)


def _resolve_fraud(ctx: _Ctx, body: ResolveFraud) -> None:
    _require_board(ctx)
    report = _get_report(ctx, body.report)
    if report.resolution is not Resolution.OPEN:
        raise TransactionError("AlreadyResolved", str(body.report))
    report.resolution = body.verdict
    ctx.w.touch(FRAUD_REPORTS_ADDRESS)
    ctx.emit(EventKind.FRAUD_RESOLVED, cert_id=report.fake_cert.cert_id, ca_id=report.issuer_id,
             domains=report.fake_cert.subject_alternative_names, report=body.report,
             detail=body.verdict.name)
    if body.verdict is Resolution.UPHELD:
        entry = ctx.cas.entries.get(report.issuer_id)
        if entry is not None and entry.status is CAStatus.TRUSTED:
            _untrust(ctx, report.issuer_id)
        fake = ctx.w.get(cert_address(report.fake_cert.cert_id))
        if fake is not None and fake.status is CertStatus.NOT_REVOKED:
            _revoke_record(ctx, fake)


def _transfer_token(ctx: _Ctx, body: TransferToken) -> None:
    sender = ctx.w.account(ctx.tx.sender)
    fee = ctx.token.fee(TxKind.TRANSFER_TOKEN)
    if sender.balance < body.amount + fee:
        raise TransactionError("InsufficientBalance", f"need {body.amount + fee}")
    ctx.charge_fee(ctx.token.foundation_account)
    ctx.move(ctx.tx.sender, body.recipient, body.amount)


_HANDLERS: dict[TxKind, Callable] = {
    TxKind.ADD_TRUSTED_CA: _add_trusted_ca,
    TxKind.UNTRUST_CA: _untrust_ca,
    TxKind.ADD_TLS_CERT: _add_tls_cert,
    TxKind.REVOKE_CERT: _revoke_cert,
    TxKind.REPORT_FRAUD: _report_fraud,
    TxKind.PLEAD_FRAUD: _plead_fraud,
    TxKind.RESOLVE_FRAUD: _resolve_fraud,
    TxKind.TRANSFER_TOKEN: _transfer_token,
}


def check_envelope(state: WorldState, tx: Transaction) -> AccountState:
    """Signature and sender checks shared by the pool and execution."""
    if not verify(tx.sender_key, tx.sender_signature, tx.digest()):
        raise TransactionError("BadSignature", "sender signature does not verify")
    acct = state.account(tx.sender)
    if not isinstance(acct, AccountState):
        raise TransactionError("UnknownSender", tx.sender.hex())
    return acct


def apply_transaction(
    state: WorldState, tx: Transaction, now: int, block_number: int = 0
) -> tuple[WorldState, list[Event]]:
    """Execute ``tx`` against ``state``.

    Returns the new state and the events it triggered. Raises
    :class:`TransactionError` and leaves ``state`` as it was on any failure.
    """
    acct = check_envelope(state, tx)
    if tx.nonce != acct.nonce:
        code = "StaleNonce" if tx.nonce < acct.nonce else "FutureNonce"
        raise TransactionError(code, f"expected {acct.nonce}, got {tx.nonce}")
    try:
        body = tx.body()
    except DecodeError as exc:
        raise TransactionError("MalformedPayload", str(exc)) from None
    ctx = _Ctx(_Working(state), tx, now, block_number)
    _HANDLERS[tx.kind](ctx, body)
    sender = ctx.w.account(tx.sender)
    sender.nonce += 1
    if not sender.owner_key:
        sender.owner_key = tx.sender_key
    ctx.w.touch(tx.sender)
    return ctx.w.commit(), ctx.events


def _apply_kind(kind: TxKind):
    def op(state: WorldState, tx: Transaction, now: int, block_number: int = 0):
        if tx.kind is not kind:
            raise TransactionError("WrongKind", f"expected {kind.name}, got {tx.kind.name}")
        return apply_transaction(state, tx, now, block_number)

    op.__name__ = kind.name.lower()
    op.__doc__ = f"Apply a {kind.name} transaction; see :func:`apply_transaction`."
    return op


add_trusted_ca = _apply_kind(TxKind.ADD_TRUSTED_CA)
untrust_ca = _apply_kind(TxKind.UNTRUST_CA)
add_tls_certificate = _apply_kind(TxKind.ADD_TLS_CERT)
revoke_certificate = _apply_kind(TxKind.REVOKE_CERT)
report_fraud = _apply_kind(TxKind.REPORT_FRAUD)
plead_fraud = _apply_kind(TxKind.PLEAD_FRAUD)
resolve_fraud = _apply_kind(TxKind.RESOLVE_FRAUD)


def transfer_token(state: WorldState, tx: Transaction, now: int = 0) -> WorldState:
    if tx.kind is not TxKind.TRANSFER_TOKEN:
        raise TransactionError("WrongKind", f"expected TRANSFER_TOKEN, got {tx.kind.name}")
    return apply_transaction(state, tx, now)[0]


def search_certificates(
    state: WorldState, domain: str, status: CertStatus | None = None
) -> list[CertRecord]:
    dom = state.domain(domain)
    if dom is None:
        return []
    records = [state.cert_record(cid) for cid in dom.cert_ids]
    return [r for r in records if status is None or r.status is status]


def invariant_violations(state: WorldState) -> list[str]:
    """Full-state scan for broken invariants; empty when the state is sound."""
    problems = []
    token = state.token()
    total = state.total_balance()
    if total != token.total_supply:
        problems.append(f"balances sum to {total}, supply is {token.total_supply}")
    cas = state.trusted_cas()
    untrusted = {cid for cid, e in cas.entries.items() if e.status is CAStatus.UNTRUSTED}
    for _, rec in state.records():
        if (isinstance(rec, CertRecord) and rec.status is CertStatus.NOT_REVOKED
                and rec.certificate.issuer_id in untrusted):
            problems.append(f"live certificate {rec.cert_id.hex()[:16]} under untrusted CA")
    for i, rep in enumerate(state.fraud_reports().reports):
        if rep.resolution is Resolution.UPHELD and rep.issuer_id not in untrusted:
            problems.append(f"report {i} upheld but issuer still trusted")
    return problems
