from __future__ import annotations

import sys

import pytest

from certledger.cert import issue_certificate
from certledger.crypto import KeyPair
from certledger.state import (
    AddTLSCert,
    AddTrustedCA,
    GenesisConfig,
    Transaction,
    WorldState,
    apply_transaction,
)

T0 = 1_700_000_000
DAY = 86400


class World:
    """A small ledger world: three board members (threshold 2), two CAs, funded accounts."""

    def __init__(self, threshold: int = 2, board_size: int = 3) -> None:
        self.board = [KeyPair.from_seed(f"test/board/{i}") for i in range(board_size)]
        self.foundation = KeyPair.from_seed("test/foundation")
        self.cas = [KeyPair.from_seed(f"test/ca/{i}") for i in range(2)]
        self.alice = KeyPair.from_seed("test/alice")
        self.bob = KeyPair.from_seed("test/bob")
        self.ca_certs = [
            issue_certificate(k, k.public, f"Test CA {i}", [], T0 - DAY, T0 + 3650 * DAY,
                              bytes([i]) * 16, is_ca=True)
            for i, k in enumerate(self.cas)
        ]
        self.config = GenesisConfig(
            board_keys=tuple(k.public for k in self.board),
            threshold=threshold,
            foundation_key=self.foundation.public,
            total_supply=1_000_000,
            allocations={k.public: 1000 for k in (*self.cas, self.alice, self.bob)},
            timestamp=T0,
        )
        self.state = WorldState.genesis(self.config)
        self.now = T0 + 600
        self.block = 1
        self.nonces: dict[bytes, int] = {}
        self.events = []
        self._serial = 100

    def tx(self, sender: KeyPair, body, board=(), nonce: int | None = None) -> Transaction:
        if nonce is None:
            acct = self.state.account(sender.address)
            nonce = acct.nonce if acct else 0
        return Transaction.create(sender, nonce, body, board)

    def apply(self, sender: KeyPair, body, board=()):
        tx = self.tx(sender, body, board)
        self.state, evs = apply_transaction(self.state, tx, self.now, self.block)
        self.events.extend(evs)
        self.block += 1
        self.now += 600
        return evs

    def trust(self, i: int = 0):
        return self.apply(self.cas[i], AddTrustedCA(self.ca_certs[i]), self.board[:2])

    def leaf(self, ca: int = 0, sans=("example.com",), days: int = 90, key: KeyPair | None = None,
             start: int | None = None):
        self._serial += 1
        key = key or KeyPair.from_seed(f"test/leaf/{self._serial}")
        start = T0 if start is None else start
        cert = issue_certificate(self.cas[ca], key.public, sans[0], list(sans), start,
                                 start + days * DAY, self._serial.to_bytes(16, "big"),
                                 issuer=self.ca_certs[ca])
        return cert, key

    def add_leaf(self, ca: int = 0, sans=("example.com",), owner: KeyPair | None = None, **kw):
        cert, key = self.leaf(ca, sans, **kw)
        self.apply(owner or self.alice, AddTLSCert(cert))
        return cert, key


@pytest.fixture
def world() -> World:
    return World()


@pytest.fixture
def trusted_world() -> World:
    w = World()
    w.trust(0)
    w.trust(1)
    return w


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
