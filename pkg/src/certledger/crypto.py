"""Hashing and signing primitives.

Everything that needs a digest goes through :func:`sha256`; everything that
signs goes through :class:`KeyPair`. The signature scheme is Ed25519
(deterministic signatures over a 255-bit Edwards curve, 32-byte public keys).
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

HASH_SIZE = 32
ZERO_HASH = bytes(HASH_SIZE)


def sha256(*parts: bytes) -> bytes:
    h = hashlib.sha256()
    for p in parts:
        h.update(p)
    return h.digest()


@dataclass(frozen=True)
class KeyPair:
    """A signing key together with its raw public key."""

    private: bytes
    public: bytes

    @classmethod
    def from_seed(cls, seed: bytes | str | int) -> "KeyPair":
        """Derive a key pair deterministically from an arbitrary seed."""
        if isinstance(seed, int):
            seed = seed.to_bytes(16, "big", signed=True)
        elif isinstance(seed, str):
            seed = seed.encode()
        private = sha256(b"certledger/keygen", seed)
        return cls.from_private(private)

    @classmethod
    def from_private(cls, private: bytes) -> "KeyPair":
        sk = Ed25519PrivateKey.from_private_bytes(private)
        return cls(private, sk.public_key().public_bytes_raw())

    @property
    def address(self) -> bytes:
        return address_of(self.public)

    def sign(self, message: bytes) -> bytes:
        return _signer(self.private).sign(message)


@lru_cache(maxsize=1024)
def _signer(private: bytes) -> Ed25519PrivateKey:
    return Ed25519PrivateKey.from_private_bytes(private)


@lru_cache(maxsize=1 << 16)
def verify(public: bytes, signature: bytes, message: bytes) -> bool:
    """True iff ``signature`` is valid for ``message`` under ``public``.

    Never raises: malformed keys or signatures simply fail verification.
    """
    if len(public) != 32 or len(signature) != 64:
        return False
    try:
        Ed25519PublicKey.from_public_bytes(public).verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True


def address_of(public_key: bytes) -> bytes:
    """Account address owned by a public key."""
    return sha256(b"account:", public_key)
