"""Canonical certificates, signing and profile validation.

Byte layout of an encoded certificate (all integers big-endian)::

    off  size        field
    0    1           format version (= 1)
    1    16          serial
    17   2+L         subject_common_name   (u16 length, UTF-8)
    ..   2+Σ(2+Li)   subject_alternative_names (u16 count, each u16 length + ASCII)
    ..   32          issuer_id             (cert_id of issuer, zeros when self-signed)
    ..   8           validity_not_before   (u64 UNIX seconds)
    ..   8           validity_not_after    (u64 UNIX seconds)
    ..   1+K         public_key            (u8 length, K in {32, 33})
    ..   1           is_ca                 (0 or 1)
    ..   1           key_usage             (bit 0 digital_signature, bit 1 cert_sign)
    ..   2+S         signature             (u16 length)

The to-be-signed bytes are everything before the signature field. The
``cert_id`` is the SHA-256 of the complete encoding, signature included.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable

from .codec import DecodeError, Reader, Writer
from .crypto import ZERO_HASH, KeyPair, sha256, verify

FORMAT_VERSION = 1
SERIAL_SIZE = 16
MAX_TLS_LIFETIME = 825 * 86400

_DNS_LABEL = re.compile(r"^(?!-)[a-z0-9-]{1,63}(?<!-)$")


class KeyUsage(enum.IntFlag):
    NONE = 0
    DIGITAL_SIGNATURE = 1
    CERT_SIGN = 2


class Verdict(enum.Enum):
    VALID = "Valid"
    EXPIRED = "Expired"
    NOT_YET_VALID = "NotYetValid"
    PROFILE_VIOLATION = "ProfileViolation"
    UNKNOWN_ISSUER = "UnknownIssuer"
    BAD_SIGNATURE = "BadSignature"


@dataclass(frozen=True)
class ValidationOutcome:
    verdict: Verdict
    detail: str = ""

    def __post_init__(self) -> None:
        if self.verdict is Verdict.VALID and self.detail:
            raise ValueError("a Valid outcome carries no detail")

    @property
    def ok(self) -> bool:
        return self.verdict is Verdict.VALID


VALID = ValidationOutcome(Verdict.VALID)


@dataclass(frozen=True)
class Certificate:
    serial: bytes
    subject_common_name: str
    subject_alternative_names: tuple[str, ...]
    issuer_id: bytes
    not_before: int
    not_after: int
    public_key: bytes
    is_ca: bool
    key_usage: KeyUsage
    signature: bytes = field(default=b"", repr=False)

    def __post_init__(self) -> None:
        # structural constraints only; semantic ones are checked by the validators
        if len(self.serial) != SERIAL_SIZE:
            raise ValueError("serial must be 16 bytes")
        if len(self.issuer_id) != 32:
            raise ValueError("issuer_id must be 32 bytes")
        if len(self.public_key) not in (32, 33):
            raise ValueError("public_key must be 32 or 33 bytes")
        if not (0 <= self.not_before < 2**64 and 0 <= self.not_after < 2**64):
            raise ValueError("validity bounds must be unsigned 64-bit")
        if not isinstance(self.subject_alternative_names, tuple):
            object.__setattr__(
                self, "subject_alternative_names", tuple(self.subject_alternative_names)
            )
        if not all(n.isascii() for n in self.subject_alternative_names):
            raise ValueError("subject alternative names must be ASCII")
        object.__setattr__(self, "key_usage", KeyUsage(self.key_usage))

    @cached_property
    def cert_id(self) -> bytes:
        return sha256(encode_certificate(self))

    @property
    def self_signed(self) -> bool:
        return self.issuer_id == ZERO_HASH

    def tbs_bytes(self) -> bytes:
        return _encode_tbs(self).getvalue()

    def covers(self, domain: str) -> bool:
        return domain.lower() in (n.lower() for n in self.subject_alternative_names)


def _encode_tbs(cert: Certificate) -> Writer:
    w = Writer()
    w.u8(FORMAT_VERSION).fixed(cert.serial, SERIAL_SIZE)
    w.str16(cert.subject_common_name)
    w.u16(len(cert.subject_alternative_names))
    for name in cert.subject_alternative_names:
        w.bytes16(name.encode("ascii"))
    w.fixed(cert.issuer_id, 32).u64(cert.not_before).u64(cert.not_after)
    w.bytes8(cert.public_key).u8(int(cert.is_ca)).u8(int(cert.key_usage))
    return w


def encode_certificate(cert: Certificate) -> bytes:
    return _encode_tbs(cert).bytes16(cert.signature).getvalue()


def read_certificate(r: Reader) -> Certificate:
    version = r.u8()
    if version != FORMAT_VERSION:
        raise DecodeError(f"unsupported certificate version {version}")
    serial = r.take(SERIAL_SIZE)
    cn = r.str16()
    try:
        sans = tuple(r.bytes16().decode("ascii") for _ in range(r.u16()))
    except UnicodeDecodeError as exc:
        raise DecodeError(str(exc)) from None
    issuer_id = r.take(32)
    not_before, not_after = r.u64(), r.u64()
    public_key = r.bytes8()
    is_ca = r.flag()
    usage = r.u8()
    if usage & ~int(KeyUsage.DIGITAL_SIGNATURE | KeyUsage.CERT_SIGN):
        raise DecodeError(f"unknown key usage bits {usage:#x}")
    signature = r.bytes16()
    try:
        return Certificate(serial, cn, sans, issuer_id, not_before, not_after,
                           public_key, is_ca, KeyUsage(usage), signature)
    except ValueError as exc:
        raise DecodeError(str(exc)) from None


def decode_certificate(data: bytes) -> Certificate:
    r = Reader(data)
    cert = read_certificate(r)
    r.done()
    return cert


def sign_certificate(cert: Certificate, key: KeyPair) -> Certificate:
    return replace(cert, signature=key.sign(cert.tbs_bytes()))


def issue_certificate(
    issuer_key: KeyPair,
    subject_key: bytes,
    common_name: str,
    sans: Iterable[str],
    not_before: int,
    not_after: int,
    serial: bytes,
    *,
    issuer: Certificate | None = None,
    is_ca: bool = False,
    key_usage: KeyUsage | None = None,
) -> Certificate:
    """Build and sign a certificate.

    With ``issuer=None`` the certificate is self-signed (issuer_id all zeros),
    which is how root CA certificates are represented. Leaf certificates get
    ``digital_signature`` and CA certificates ``cert_sign | digital_signature``
    unless ``key_usage`` says otherwise.
    """
    if key_usage is None:
        key_usage = KeyUsage.DIGITAL_SIGNATURE
        if is_ca:
            key_usage |= KeyUsage.CERT_SIGN
    cert = Certificate(
        serial=serial,
        subject_common_name=common_name,
        subject_alternative_names=tuple(sans),
        issuer_id=issuer.cert_id if issuer is not None else ZERO_HASH,
        not_before=not_before,
        not_after=not_after,
        public_key=subject_key,
        is_ca=is_ca,
        key_usage=key_usage,
    )
    return sign_certificate(cert, issuer_key)


def verify_signature(cert: Certificate, issuer_key: bytes) -> bool:
    return verify(issuer_key, cert.signature, cert.tbs_bytes())


def is_dns_name(name: str) -> bool:
    if not name or len(name) > 253 or name != name.lower():
        return False
    labels = name.split(".")
    if labels[0] == "*":
        labels = labels[1:]
    return len(labels) >= 1 and all(_DNS_LABEL.match(label) for label in labels)


def _check_period(cert: Certificate, now: int) -> ValidationOutcome:
    if now < cert.not_before:
        return ValidationOutcome(Verdict.NOT_YET_VALID, f"valid from {cert.not_before}")
    if now > cert.not_after:
        return ValidationOutcome(Verdict.EXPIRED, f"expired at {cert.not_after}")
    return VALID


def _violation(detail: str) -> ValidationOutcome:
    return ValidationOutcome(Verdict.PROFILE_VIOLATION, detail)


def validate_tls_profile(cert: Certificate, now: int) -> ValidationOutcome:
    """Check a leaf certificate: validity period, then profile, then lifetime."""
    outcome = _check_period(cert, now)
    if not outcome.ok:
        return outcome
    if cert.not_before >= cert.not_after:
        return _violation("empty validity window")
    if cert.is_ca:
        return _violation("CA certificate presented as TLS certificate")
    if not cert.subject_alternative_names:
        return _violation("no subject alternative names")
    bad = [n for n in cert.subject_alternative_names if not is_dns_name(n)]
    if bad:
        return _violation(f"malformed DNS name {bad[0]!r}")
    if KeyUsage.DIGITAL_SIGNATURE not in cert.key_usage:
        return _violation("digital_signature key usage missing")
    if KeyUsage.CERT_SIGN in cert.key_usage:
        return _violation("cert_sign key usage on a leaf certificate")
    lifetime = cert.not_after - cert.not_before
    if lifetime > MAX_TLS_LIFETIME:
        return _violation(f"lifetime {lifetime // 86400} days exceeds 825")
    return VALID


def validate_ca_profile(cert: Certificate, now: int) -> ValidationOutcome:
    outcome = _check_period(cert, now)
    if not outcome.ok:
        return outcome
    if cert.not_before >= cert.not_after:
        return _violation("empty validity window")
    if not cert.is_ca:
        return _violation("basic constraints do not mark a CA")
    if KeyUsage.CERT_SIGN not in cert.key_usage:
        return _violation("cert_sign key usage missing")
    return VALID


def build_trusted_path(
    cert: Certificate, trusted_set: Iterable[Certificate]
) -> Certificate | ValidationOutcome:
    """Return the trusted CA that issued ``cert``, or the failing outcome.

    Only single-level chains are built: the issuer must itself be in the
    trusted set.
    """
    for ca in trusted_set:
        if ca.cert_id == cert.issuer_id:
            if verify_signature(cert, ca.public_key):
                return ca
            return ValidationOutcome(Verdict.BAD_SIGNATURE, "signature does not verify under issuer key")
    return ValidationOutcome(Verdict.UNKNOWN_ISSUER, f"issuer {cert.issuer_id.hex()[:16]} not trusted")


_FIXTURE_FIELDS = (
    "serial", "subject_common_name", "subject_alternative_names", "issuer_id",
    "not_before", "not_after", "public_key", "is_ca", "key_usage", "signature",
)


def to_fixture(cert: Certificate) -> str:
    """Render ``cert`` in the text fixture format (``key: value`` per line)."""
    usage = [u.name.lower() for u in (KeyUsage.DIGITAL_SIGNATURE, KeyUsage.CERT_SIGN)
             if u in cert.key_usage]
    values = {
        "serial": cert.serial.hex(),
        "subject_common_name": cert.subject_common_name,
        "subject_alternative_names": ",".join(cert.subject_alternative_names),
        "issuer_id": cert.issuer_id.hex(),
        "not_before": str(cert.not_before),
        "not_after": str(cert.not_after),
        "public_key": cert.public_key.hex(),
        "is_ca": "true" if cert.is_ca else "false",
        "key_usage": ",".join(usage),
        "signature": cert.signature.hex(),
    }
    return "".join(f"{k}: {values[k]}\n" for k in _FIXTURE_FIELDS)


def from_fixture(text: str) -> Certificate:
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'key: value'")
        key = key.strip()
        if key not in _FIXTURE_FIELDS:
            raise ValueError(f"line {lineno}: unknown field {key!r}")
        values[key] = value.strip()
    missing = [k for k in _FIXTURE_FIELDS if k not in values and k != "signature"]
    if missing:
        raise ValueError(f"missing fields: {', '.join(missing)}")
    usage = KeyUsage.NONE
    for name in filter(None, (s.strip() for s in values["key_usage"].split(","))):
        usage |= KeyUsage[name.upper()]
    sans = tuple(filter(None, (s.strip() for s in values["subject_alternative_names"].split(","))))
    return Certificate(
        serial=bytes.fromhex(values["serial"]),
        subject_common_name=values["subject_common_name"],
        subject_alternative_names=sans,
        issuer_id=bytes.fromhex(values["issuer_id"]),
        not_before=int(values["not_before"]),
        not_after=int(values["not_after"]),
        public_key=bytes.fromhex(values["public_key"]),
        is_ca=values["is_ca"].lower() in ("true", "1", "yes"),
        key_usage=usage,
        signature=bytes.fromhex(values.get("signature", "")),
    )
