"""Header-only client and the handshake-time certificate check.

A :class:`HandshakeBundle` is what a server hands the client in place of a
certificate chain. Its canonical encoding::

    "CLHB" | u8 version (=1) | u64 block_number |
    u32 len + certificate | u8 has_record [u32 len + record] |
    u32 len + proof blob

The client trusts nothing but its header chain: no CA certificates, no log
keys. A certificate is accepted iff a proof against the agreed header's
state root shows its record with status NotRevoked.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

from .cert import Certificate, decode_certificate, encode_certificate
from .codec import DecodeError, Reader, Writer
from .ledger import BlockHeader, Chain
from .state import CertRecord, CertStatus, cert_address, decode_record
from .trie import MerkleProof, Verified, verify_proof

DEFAULT_FRESHNESS = 1


class Reason(enum.Enum):
    OK = "Ok"
    DOMAIN_MISMATCH = "DomainMismatch"
    OUTSIDE_VALIDITY = "OutsideValidity"
    PROOF_INVALID = "ProofInvalid"
    REVOKED = "Revoked"
    ABSENT_FROM_LEDGER = "AbsentFromLedger"
    UNKNOWN_BLOCK = "UnknownBlock"


@dataclass(frozen=True)
class HandshakeDecision:
    reason: Reason

    @property
    def accepted(self) -> bool:
        return self.reason is Reason.OK

    @property
    def verdict(self) -> str:
        return "Accept" if self.accepted else "Reject"

    def __str__(self) -> str:
        return "Accept" if self.accepted else f"Reject({self.reason.value})"


class SyncError(Exception):
    def __init__(self, code: str, detail: str = "") -> None:
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code


class LightClient:
    """Stores block headers only.

    ``freshness`` is the number of most recent heights a handshake may refer
    to: with the default of 1 only the tip is acceptable, so a proof taken
    before a later revocation cannot be replayed once the client has the
    revoking block.
    """

    def __init__(self, genesis: BlockHeader, freshness: int = DEFAULT_FRESHNESS,
                 _headers: dict[int, BlockHeader] | None = None) -> None:
        if genesis.number != 0:
            raise ValueError("light clients start from the genesis header")
        if freshness < 1:
            raise ValueError("freshness window must be at least 1")
        self.freshness = freshness
        self.headers = dict(_headers) if _headers else {0: genesis}
        self.tip = max(self.headers)

    def header(self, number: int) -> BlockHeader | None:
        return self.headers.get(number)

    def sync_headers(self, new_headers: Iterable[BlockHeader]) -> "LightClient":
        """Return a client extended by ``new_headers``; ``self`` is not modified."""
        headers = dict(self.headers)
        tip = self.tip
        for h in new_headers:
            if h.number <= tip:
                if headers[h.number] != h:
                    raise SyncError("BrokenLinkage", f"conflicting header at {h.number}")
                continue
            if h.number != tip + 1:
                raise SyncError("GapInHeights", f"expected {tip + 1}, got {h.number}")
            if h.parent_hash != headers[tip].hash:
                raise SyncError("BrokenLinkage", f"header {h.number} does not extend {tip}")
            headers[h.number] = h
            tip = h.number
        return LightClient(headers[0], self.freshness, headers)


def sync_headers(client: LightClient, new_headers: Iterable[BlockHeader]) -> LightClient:
    return client.sync_headers(new_headers)


@dataclass(frozen=True)
class HandshakeBundle:
    certificate: Certificate
    record: bytes | None
    proof: MerkleProof
    block_number: int

    def encode(self) -> bytes:
        w = Writer().raw(b"CLHB").u8(1).u64(self.block_number)
        w.bytes32(encode_certificate(self.certificate))
        if self.record is None:
            w.u8(0)
        else:
            w.u8(1).bytes32(self.record)
        return w.bytes32(self.proof.to_bytes()).getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "HandshakeBundle":
        r = Reader(data)
        if r.take(4) != b"CLHB" or r.u8() != 1:
            raise DecodeError("not a handshake bundle")
        number = r.u64()
        cert = decode_certificate(r.bytes32())
        record = r.bytes32() if r.flag() else None
        proof = MerkleProof.from_bytes(r.bytes32())
        r.done()
        return cls(cert, record, proof, number)


def verify_handshake(
    client: LightClient, domain: str, bundle: HandshakeBundle, now: int
) -> HandshakeDecision:
    """Decide whether to accept ``bundle`` for ``domain`` at time ``now``.

    Checks run in a fixed order and the first failure is reported:
    known and fresh block, domain binding, validity period, proof against
    the header's state root, then record match and revocation status.
    """
    header = client.header(bundle.block_number)
    if header is None or client.tip - bundle.block_number >= client.freshness:
        return HandshakeDecision(Reason.UNKNOWN_BLOCK)
    cert = bundle.certificate
    if not cert.covers(domain):
        return HandshakeDecision(Reason.DOMAIN_MISMATCH)
    if not cert.not_before <= now <= cert.not_after:
        return HandshakeDecision(Reason.OUTSIDE_VALIDITY)

    key = cert_address(cert.cert_id)
    result = verify_proof(header.state_root, key, bundle.proof)
    if not isinstance(result, Verified) or result.value != bundle.record:
        return HandshakeDecision(Reason.PROOF_INVALID)
    if result.value is None:
        return HandshakeDecision(Reason.ABSENT_FROM_LEDGER)
    try:
        record = decode_record(result.value)
    except DecodeError:
        return HandshakeDecision(Reason.PROOF_INVALID)
    if not isinstance(record, CertRecord) or record.certificate != cert:
        return HandshakeDecision(Reason.PROOF_INVALID)
    if record.status is not CertStatus.NOT_REVOKED:
        return HandshakeDecision(Reason.REVOKED)
    return HandshakeDecision(Reason.OK)


def retrieve_state_proof(
    chain: Chain, cert: Certificate | bytes, block_number: int | None = None
) -> HandshakeBundle:
    """Full-node side: build a bundle for ``cert`` at ``block_number`` (default tip).

    ``cert`` may be a certificate id when the node already holds the
    certificate. An unknown certificate yields an absence-proof bundle,
    which requires passing the certificate itself.
    """
    if block_number is None:
        block_number = chain.height
    try:
        state = chain.state_at(block_number)
    except KeyError:
        raise LookupError(f"UnknownBlock: {block_number}") from None
    if isinstance(cert, bytes):
        rec = state.cert_record(cert) or chain.state.cert_record(cert)
        if rec is None:
            raise LookupError(f"UnknownCert: {cert.hex()}")
        cert = rec.certificate
    proof = state.trie.prove(cert_address(cert.cert_id))
    return HandshakeBundle(cert, proof.value, proof, block_number)
