"""Blocks, the transaction pool and forkless chain maintenance.

Header layout (144 bytes, big-endian)::

    0    8   number
    8    32  parent_hash      (zeros for genesis)
    40   32  tx_root          (binary Merkle root over transaction encodings)
    72   32  state_root       (trie root after applying the block)
    104  8   timestamp        (UNIX seconds, simulated)
    112  32  proposer_id

The header hash is SHA-256 over those 144 bytes. Block producers rotate
round-robin over the genesis authority list, so every height has exactly one
legitimate proposer and the chain never forks.

Chain files are ``b"CLCHAIN1"`` followed by ``u32 length | block`` records,
genesis first. A block is its header followed by ``u32 count`` and
``u32 length | transaction`` entries.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable

from .codec import DecodeError, Reader, Writer
from .crypto import ZERO_HASH, sha256
from .state import (
    Event,
    GenesisConfig,
    Transaction,
    TransactionError,
    WorldState,
    apply_transaction,
    check_envelope,
)

log = logging.getLogger(__name__)

HEADER_SIZE = 144
CHAIN_MAGIC = b"CLCHAIN1"


class BlockError(Exception):
    def __init__(self, code: str, detail: str = "") -> None:
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


class PoolError(Exception):
    def __init__(self, code: str, detail: str = "") -> None:
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code


def merkle_root(leaves: Iterable[bytes]) -> bytes:
    """Binary Merkle root with domain-separated leaf (0x00) and node (0x01) hashes.

    An odd node at any level is promoted unchanged; the empty list hashes to
    ``sha256(b"")``.
    """
    level = [sha256(b"\x00", leaf) for leaf in leaves]
    if not level:
        return sha256(b"")
    while len(level) > 1:
        nxt = [sha256(b"\x01", level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def tx_root(transactions: Iterable[Transaction]) -> bytes:
    return merkle_root(tx.encode() for tx in transactions)


@dataclass(frozen=True)
class BlockHeader:
    number: int
    parent_hash: bytes
    tx_root: bytes
    state_root: bytes
    timestamp: int
    proposer_id: bytes

    def encode(self) -> bytes:
        w = Writer().u64(self.number).fixed(self.parent_hash, 32).fixed(self.tx_root, 32)
        w.fixed(self.state_root, 32).u64(self.timestamp).fixed(self.proposer_id, 32)
        return w.getvalue()

    @classmethod
    def read(cls, r: Reader) -> "BlockHeader":
        return cls(r.u64(), r.take(32), r.take(32), r.take(32), r.u64(), r.take(32))

    @classmethod
    def decode(cls, data: bytes) -> "BlockHeader":
        if len(data) != HEADER_SIZE:
            raise DecodeError(f"header must be {HEADER_SIZE} bytes")
        return cls.read(Reader(data))

    @cached_property
    def hash(self) -> bytes:
        return sha256(self.encode())


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    transactions: tuple[Transaction, ...] = ()

    def encode(self) -> bytes:
        w = Writer().raw(self.header.encode()).u32(len(self.transactions))
        for tx in self.transactions:
            w.bytes32(tx.encode())
        return w.getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "Block":
        r = Reader(data)
        header = BlockHeader.read(r)
        txs = tuple(Transaction.decode(r.bytes32()) for _ in range(r.u32()))
        r.done()
        return cls(header, txs)


def genesis_block(config: GenesisConfig) -> tuple[Block, WorldState]:
    state = WorldState.genesis(config)
    header = BlockHeader(0, ZERO_HASH, tx_root(()), state.root, config.timestamp, ZERO_HASH)
    return Block(header), state


def scheduled_proposer(config: GenesisConfig, height: int) -> bytes:
    return config.authorities[height % len(config.authorities)]


class TxPool:
    """Pending transactions keyed by hash."""

    def __init__(self) -> None:
        self._txs: dict[bytes, Transaction] = {}

    def __len__(self) -> int:
        return len(self._txs)

    def __contains__(self, tx: Transaction) -> bool:
        return tx.tx_hash in self._txs

    def pending(self) -> list[Transaction]:
        """Pending transactions in block order: sender address, nonce, hash."""
        return sorted(self._txs.values(), key=lambda t: (t.sender, t.nonce, t.tx_hash))

    def submit(self, tx: Transaction, state: WorldState) -> None:
        if tx.tx_hash in self._txs:
            raise PoolError("DuplicateInPool", tx.tx_hash.hex())
        try:
            acct = check_envelope(state, tx)
        except TransactionError as exc:
            raise PoolError(exc.code, exc.detail) from None
        if tx.nonce < acct.nonce:
            raise PoolError("StaleNonce", f"account nonce {acct.nonce}, tx nonce {tx.nonce}")
        self._txs[tx.tx_hash] = tx

    def remove(self, hashes: Iterable[bytes]) -> None:
        for h in hashes:
            self._txs.pop(h, None)


def submit_transaction(pool: TxPool, tx: Transaction, state: WorldState) -> TxPool:
    pool.submit(tx, state)
    return pool


@dataclass
class BlockResult:
    block: Block
    state: WorldState
    events: list[Event]
    dropped: list[tuple[bytes, str]] = field(default_factory=list)


def _execute(state: WorldState, txs: Iterable[Transaction], number: int, now: int,
             strict: bool) -> tuple[WorldState, list[Transaction], list[Event], list[tuple[bytes, str]]]:
    included, events, dropped = [], [], []
    for tx in txs:
        try:
            state, evs = apply_transaction(state, tx, now, number)
        except TransactionError as exc:
            if strict:
                raise BlockError("InvalidTransaction", f"{tx.tx_hash.hex()[:16]}: {exc}") from None
            dropped.append((tx.tx_hash, exc.code))
            continue
        included.append(tx)
        for ev in evs:
            events.append(Event(number, len(events), ev.kind, ev.cert_id, ev.ca_id,
                                ev.domains, ev.report, ev.detail))
    return state, included, events, dropped


def produce_block(
    config: GenesisConfig,
    state: WorldState,
    pool: TxPool,
    parent: BlockHeader,
    proposer: bytes,
    now: int,
) -> BlockResult:
    """Build the next block from the pool.

    Transactions that fail are left out and reported in ``dropped``; they
    never make the block itself invalid. Included and dropped transactions
    are removed from the pool.
    """
    number = parent.number + 1
    if proposer != scheduled_proposer(config, number):
        raise BlockError("NotYourTurn", f"height {number}")
    if now <= parent.timestamp:
        raise BlockError("NonMonotoneTimestamp", f"{now} <= {parent.timestamp}")
    new_state, included, events, dropped = _execute(state, pool.pending(), number, now, strict=False)
    header = BlockHeader(number, parent.hash, tx_root(included), new_state.root, now, proposer)
    pool.remove([tx.tx_hash for tx in included] + [h for h, _ in dropped])
    for h, code in dropped:
        log.debug("block %d dropped tx %s: %s", number, h.hex()[:16], code)
    return BlockResult(Block(header, tuple(included)), new_state, events, dropped)


def validate_and_apply_block(
    config: GenesisConfig, state: WorldState, block: Block, parent: BlockHeader
) -> tuple[WorldState, list[Event]]:
    """Replay ``block`` on top of ``parent`` and check every header field."""
    h = block.header
    if h.number != parent.number + 1 or h.parent_hash != parent.hash:
        raise BlockError("BadLinkage", f"block {h.number} does not extend {parent.number}")
    if h.proposer_id != scheduled_proposer(config, h.number):
        raise BlockError("BadProposer", f"height {h.number}")
    if h.timestamp <= parent.timestamp:
        raise BlockError("NonMonotoneTimestamp", f"{h.timestamp} <= {parent.timestamp}")
    if tx_root(block.transactions) != h.tx_root:
        raise BlockError("RootMismatch", "transaction root")
    new_state, _, events, _ = _execute(state, block.transactions, h.number, h.timestamp, strict=True)
    if new_state.root != h.state_root:
        raise BlockError("RootMismatch", "state root")
    return new_state, events


class Chain:
    """A full node: every block, the state after each, and the event log."""

    def __init__(self, config: GenesisConfig) -> None:
        self.config = config
        block, state = genesis_block(config)
        self.blocks: list[Block] = [block]
        self.states: list[WorldState] = [state]
        self.events: list[Event] = []
        self.pool = TxPool()
        self.dropped: list[tuple[int, bytes, str]] = []
        self.subscribers: list[Callable[[int, list[Event]], None]] = []

    @property
    def height(self) -> int:
        return len(self.blocks) - 1

    @property
    def tip(self) -> BlockHeader:
        return self.blocks[-1].header

    @property
    def state(self) -> WorldState:
        return self.states[-1]

    def state_at(self, number: int) -> WorldState:
        if not 0 <= number <= self.height:
            raise KeyError(number)
        return self.states[number]

    def header(self, number: int) -> BlockHeader:
        return self.blocks[number].header

    def submit(self, tx: Transaction) -> None:
        self.pool.submit(tx, self.state)

    def next_proposer(self) -> bytes:
        return scheduled_proposer(self.config, self.height + 1)

    def produce(self, now: int, proposer: bytes | None = None) -> BlockResult:
        if proposer is None:
            proposer = self.next_proposer()
        result = produce_block(self.config, self.state, self.pool, self.tip, proposer, now)
        self._append(result.block, result.state, result.events)
        self.dropped.extend((result.block.header.number, h, c) for h, c in result.dropped)
        return result

    def apply(self, block: Block) -> list[Event]:
        state, events = validate_and_apply_block(self.config, self.state, block, self.tip)
        self._append(block, state, events)
        self.pool.remove(tx.tx_hash for tx in block.transactions)
        return events

    def _append(self, block: Block, state: WorldState, events: list[Event]) -> None:
        self.blocks.append(block)
        self.states.append(state)
        self.events.extend(events)
        for notify in self.subscribers:
            notify(block.header.number, events)

    def header_chain(self) -> list[BlockHeader]:
        return [b.header for b in self.blocks]

    def events_for_block(self, number: int) -> list[Event]:
        return [e for e in self.events if e.block_number == number]

    def export_bytes(self) -> bytes:
        w = Writer().raw(CHAIN_MAGIC)
        for block in self.blocks:
            w.bytes32(block.encode())
        return w.getvalue()

    def export(self, path: str | Path) -> None:
        Path(path).write_bytes(self.export_bytes())

    def export_events(self, path: str | Path) -> None:
        Path(path).write_text("".join(e.to_line() + "\n" for e in self.events))

    @classmethod
    def from_bytes(cls, config: GenesisConfig, data: bytes) -> "Chain":
        """Rebuild a chain from its export, replaying and checking every block."""
        r = Reader(data)
        if r.take(len(CHAIN_MAGIC)) != CHAIN_MAGIC:
            raise DecodeError("not a chain file")
        chain = cls(config)
        first = True
        while r.remaining:
            block = Block.decode(r.bytes32())
            if first:
                if block.header != chain.tip:
                    raise BlockError("GenesisMismatch", "chain file does not match genesis config")
                first = False
                continue
            chain.apply(block)
        return chain

    @classmethod
    def load(cls, config: GenesisConfig, path: str | Path) -> "Chain":
        return cls.from_bytes(config, Path(path).read_bytes())


def header_chain(chain: Chain) -> list[BlockHeader]:
    return chain.header_chain()
