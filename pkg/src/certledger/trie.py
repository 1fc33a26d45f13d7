"""Hexary Merkle Patricia trie with inclusion and absence proofs.

Every node is referenced by the SHA-256 of its canonical encoding; there is
no inline embedding of small nodes, so a proof is always a plain hash chain.

Node encodings::

    leaf       0x00 | path | u32 len | value
    extension  0x01 | path | child hash (32)
    branch     0x02 | u16 child bitmap (bit i = nibble i) | child hashes in
               nibble order | u8 has_value | [u32 len | value]

    path       u8 nibble count | nibbles packed high-first, odd tail padded
               with a zero low nibble

The empty trie has root ``sha256(b"")``. Keys are 32 bytes (64 nibbles), so
with fixed-length keys a branch never carries a value; the slot is kept so
the format stays general.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterator, Union

from .codec import DecodeError, Reader, Writer
from .crypto import sha256

KEY_SIZE = 32
EMPTY_ROOT = sha256(b"")
MAX_PROOF_NODES = 2 * KEY_SIZE + 1

LEAF, EXTENSION, BRANCH = 0, 1, 2

Nibbles = tuple  # tuple[int, ...]
Node = tuple  # (LEAF, path, value) | (EXTENSION, path, child) | (BRANCH, children, value)


def to_nibbles(key: bytes) -> Nibbles:
    out = []
    for b in key:
        out.append(b >> 4)
        out.append(b & 0x0F)
    return tuple(out)


def from_nibbles(nibbles: Nibbles) -> bytes:
    if len(nibbles) % 2:
        raise ValueError("odd nibble count")
    return bytes(nibbles[i] << 4 | nibbles[i + 1] for i in range(0, len(nibbles), 2))


def _write_path(w: Writer, path: Nibbles) -> None:
    w.u8(len(path))
    padded = path + (0,) if len(path) % 2 else path
    w.raw(from_nibbles(padded))


def _read_path(r: Reader) -> Nibbles:
    n = r.u8()
    nibbles = to_nibbles(r.take((n + 1) // 2))
    if n % 2 and nibbles[-1]:
        raise DecodeError("non-zero path padding")
    return nibbles[:n]


def encode_node(node: Node) -> bytes:
    w = Writer().u8(node[0])
    if node[0] == LEAF:
        _write_path(w, node[1])
        w.bytes32(node[2])
    elif node[0] == EXTENSION:
        _write_path(w, node[1])
        w.fixed(node[2], 32)
    else:
        children, value = node[1], node[2]
        bitmap = 0
        for i, c in enumerate(children):
            if c is not None:
                bitmap |= 1 << i
        w.u16(bitmap)
        for c in children:
            if c is not None:
                w.raw(c)
        if value is None:
            w.u8(0)
        else:
            w.u8(1).bytes32(value)
    return w.getvalue()


def decode_node(data: bytes) -> Node:
    r = Reader(data)
    kind = r.u8()
    if kind == LEAF:
        node: Node = (LEAF, _read_path(r), r.bytes32())
    elif kind == EXTENSION:
        path = _read_path(r)
        if not path:
            raise DecodeError("empty extension path")
        node = (EXTENSION, path, r.take(32))
    elif kind == BRANCH:
        bitmap = r.u16()
        children = tuple(r.take(32) if bitmap >> i & 1 else None for i in range(16))
        value = r.bytes32() if r.flag() else None
        node = (BRANCH, children, value)
    else:
        raise DecodeError(f"unknown node kind {kind}")
    r.done()
    return node


def _common_prefix(a: Nibbles, b: Nibbles) -> int:
    n = min(len(a), len(b))
    i = 0
    while i < n and a[i] == b[i]:
        i += 1
    return i


class StateTrie:
    """An immutable trie snapshot over a shared, append-only node store.

    ``insert`` returns a new snapshot; the old one stays valid because nodes
    are content-addressed and never removed from the store.
    """

    __slots__ = ("root_hash", "_store")

    def __init__(self, root_hash: bytes = EMPTY_ROOT, store: dict | None = None) -> None:
        self.root_hash = root_hash
        self._store: dict[bytes, tuple[Node, bytes]] = {} if store is None else store

    def __repr__(self) -> str:
        return f"StateTrie(root={self.root_hash.hex()[:16]}...)"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, StateTrie) and other.root_hash == self.root_hash

    def __hash__(self) -> int:
        return hash(self.root_hash)

    @property
    def empty(self) -> bool:
        return self.root_hash == EMPTY_ROOT

    def fork(self) -> "StateTrie":
        """Same root over a private copy of the node store."""
        return StateTrie(self.root_hash, dict(self._store))

    def _put(self, node: Node) -> bytes:
        enc = encode_node(node)
        h = sha256(enc)
        if h not in self._store:
            self._store[h] = (node, enc)
        return h

    def _node(self, h: bytes) -> Node:
        return self._store[h][0]

    def insert(self, key: bytes, value: bytes) -> "StateTrie":
        if len(key) != KEY_SIZE:
            raise ValueError(f"key must be {KEY_SIZE} bytes")
        if not value:
            raise ValueError("empty values are not storable (no deletion)")
        root = None if self.empty else self.root_hash
        return StateTrie(self._insert(root, to_nibbles(key), bytes(value)), self._store)

    def _insert(self, h: bytes | None, path: Nibbles, value: bytes) -> bytes:
        if h is None:
            return self._put((LEAF, path, value))
        node = self._node(h)
        kind = node[0]
        if kind == BRANCH:
            children, bvalue = list(node[1]), node[2]
            if not path:
                return self._put((BRANCH, tuple(children), value))
            children[path[0]] = self._insert(children[path[0]], path[1:], value)
            return self._put((BRANCH, tuple(children), bvalue))

        npath = node[1]
        k = _common_prefix(npath, path)
        if kind == LEAF and npath == path:
            return self._put((LEAF, path, value))
        if kind == EXTENSION and k == len(npath):
            return self._put((EXTENSION, npath, self._insert(node[2], path[k:], value)))

        children: list[bytes | None] = [None] * 16
        bvalue = None
        # the existing node's remainder below the split point
        if kind == LEAF:
            if k == len(npath):
                bvalue = node[2]
            else:
                children[npath[k]] = self._put((LEAF, npath[k + 1:], node[2]))
        else:
            rest = npath[k + 1:]
            children[npath[k]] = self._put((EXTENSION, rest, node[2])) if rest else node[2]
        if k == len(path):
            bvalue = value
        else:
            children[path[k]] = self._put((LEAF, path[k + 1:], value))
        branch = self._put((BRANCH, tuple(children), bvalue))
        return self._put((EXTENSION, path[:k], branch)) if k else branch

    def _walk(self, key: bytes) -> tuple[list[bytes], bytes | None]:
        """Hashes of the nodes visited for ``key`` and the value found."""
        visited: list[bytes] = []
        if self.empty:
            return visited, None
        path = to_nibbles(key)
        h: bytes | None = self.root_hash
        while h is not None:
            visited.append(h)
            node = self._node(h)
            if node[0] == LEAF:
                return visited, node[2] if node[1] == path else None
            if node[0] == EXTENSION:
                n = len(node[1])
                if path[:n] != node[1]:
                    return visited, None
                path, h = path[n:], node[2]
            else:
                if not path:
                    return visited, node[2]
                path, h = path[1:], node[1][path[0]]
        return visited, None

    def get(self, key: bytes) -> bytes | None:
        return self._walk(key)[1]

    def prove(self, key: bytes) -> "MerkleProof":
        visited, value = self._walk(key)
        return MerkleProof(bytes(key), value, tuple(self._store[h][1] for h in visited))

    def items(self) -> Iterator[tuple[bytes, bytes]]:
        """All (key, value) pairs in key order."""
        if self.empty:
            return
        stack: list[tuple[bytes, Nibbles]] = [(self.root_hash, ())]
        while stack:
            h, prefix = stack.pop()
            node = self._node(h)
            if node[0] == LEAF:
                yield from_nibbles(prefix + node[1]), node[2]
            elif node[0] == EXTENSION:
                stack.append((node[2], prefix + node[1]))
            else:
                if node[2] is not None:
                    yield from_nibbles(prefix), node[2]
                for i in range(15, -1, -1):
                    if node[1][i] is not None:
                        stack.append((node[1][i], prefix + (i,)))

    def snapshot(self) -> dict[bytes, bytes]:
        """Encodings of every node reachable from the root, keyed by digest."""
        out: dict[bytes, bytes] = {}
        stack = [] if self.empty else [self.root_hash]
        while stack:
            h = stack.pop()
            node, enc = self._store[h]
            out[h] = enc
            if node[0] == EXTENSION:
                stack.append(node[2])
            elif node[0] == BRANCH:
                stack.extend(c for c in node[1] if c is not None)
        return out

    @classmethod
    def from_snapshot(cls, root_hash: bytes, nodes: dict[bytes, bytes]) -> "StateTrie":
        store = {}
        for h, enc in nodes.items():
            if sha256(enc) != h:
                raise ValueError("snapshot node does not match its digest")
            store[h] = (decode_node(enc), enc)
        if root_hash != EMPTY_ROOT and root_hash not in store:
            raise ValueError("root missing from snapshot")
        return cls(root_hash, store)


@dataclass(frozen=True)
class MerkleProof:
    key: bytes
    value: bytes | None
    path_nodes: tuple[bytes, ...]

    def to_bytes(self) -> bytes:
        w = Writer().raw(b"CLMP").u8(1).bytes8(self.key)
        if self.value is None:
            w.u8(0)
        else:
            w.u8(1).bytes32(self.value)
        w.u16(len(self.path_nodes))
        for enc in self.path_nodes:
            w.bytes32(enc)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "MerkleProof":
        r = Reader(data)
        if r.take(4) != b"CLMP" or r.u8() != 1:
            raise DecodeError("not a proof blob")
        key = r.bytes8()
        value = r.bytes32() if r.flag() else None
        nodes = tuple(r.bytes32() for _ in range(r.u16()))
        r.done()
        return cls(key, value, nodes)


@dataclass(frozen=True)
class Verified:
    value: bytes | None

    @property
    def present(self) -> bool:
        return self.value is not None


@dataclass(frozen=True)
class Rejected:
    reason: str


ProofResult = Union[Verified, Rejected]


def verify_proof(root: bytes, key: bytes, proof: MerkleProof) -> ProofResult:
    """Check ``proof`` against ``root`` without access to any trie.

    Returns ``Verified(value)`` for an inclusion proof, ``Verified(None)``
    for an absence proof, and ``Rejected`` otherwise. The value the proof
    claims must agree with what the path actually proves.
    """
    if proof.key != key:
        return Rejected("proof is for a different key")
    nodes = proof.path_nodes
    if len(nodes) > MAX_PROOF_NODES:
        return Rejected("proof too long")
    if not nodes:
        if root != EMPTY_ROOT:
            return Rejected("empty proof for non-empty root")
        found = None
    else:
        path = to_nibbles(key)
        expected = root
        found = None
        terminal = False
        for i, enc in enumerate(nodes):
            if terminal:
                return Rejected("nodes after terminal node")
            if sha256(enc) != expected:
                return Rejected(f"hash mismatch at depth {i}")
            try:
                node = decode_node(enc)
            except DecodeError as exc:
                return Rejected(f"malformed node at depth {i}: {exc}")
            if encode_node(node) != enc:
                return Rejected(f"non-canonical node at depth {i}")
            kind = node[0]
            if kind == LEAF:
                found = node[2] if node[1] == path else None
                terminal = True
            elif kind == EXTENSION:
                n = len(node[1])
                if path[:n] != node[1]:
                    terminal = True
                else:
                    path, expected = path[n:], node[2]
            else:
                if not path:
                    found = node[2]
                    terminal = True
                elif node[1][path[0]] is None:
                    terminal = True
                else:
                    path, expected = path[1:], node[1][path[0]]
        if not terminal:
            return Rejected("proof ends before reaching the key")
    if found != proof.value:
        return Rejected("claimed value disagrees with proven value")
    return Verified(found)


def trie_insert(trie: StateTrie, key: bytes, value: bytes) -> StateTrie:
    return trie.insert(key, value)


def trie_get(trie: StateTrie, key: bytes) -> bytes | None:
    return trie.get(key)


def trie_prove(trie: StateTrie, key: bytes) -> MerkleProof:
    return trie.prove(key)


def verify_proof_bytes(root: bytes, key: bytes, blob: bytes) -> ProofResult:
    """``verify_proof`` over a serialized proof; undecodable blobs are rejected."""
    try:
        proof = MerkleProof.from_bytes(blob)
    except DecodeError as exc:
        return Rejected(f"malformed proof blob: {exc}")
    return verify_proof(root, key, proof)


def mean_proof_nodes(n: int, samples: int = 256, seed: int = 0) -> float:
    """Average inclusion-proof length, in nodes, for a trie of ``n`` random keys."""
    rng = random.Random(seed)
    keys = [rng.randbytes(KEY_SIZE) for _ in range(n)]
    trie = StateTrie()
    for i, key in enumerate(keys):
        trie = trie.insert(key, i.to_bytes(4, "big"))
    probe = rng.sample(keys, min(samples, n))
    return sum(len(trie.prove(k).path_nodes) for k in probe) / len(probe)
