"""Command-line front end.

A ledger directory holds ``genesis.json`` and ``chain.bin``. Every command
that changes state replays the chain file, applies its change, and writes the
file back, so the directory is the whole node.

Exit status: 0 on success, 1 when a transaction, handshake or scenario is
rejected, 2 for bad input. Errors go to stderr as ``error: <Category>: detail``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from .capacity import (
    ETHEREUM_LIKE_HEADER_SIZE,
    CapacityParams,
    estimate_capacity,
    reference_figures,
)
from .cert import Certificate, decode_certificate, from_fixture, issue_certificate, to_fixture
from .client import HandshakeBundle, LightClient, SyncError, retrieve_state_proof, verify_handshake
from .codec import DecodeError, Reader, Writer
from .crypto import KeyPair, address_of, sha256
from .ledger import CHAIN_MAGIC, HEADER_SIZE, Block, BlockError, BlockHeader, Chain, PoolError
from .state import (
    AddTLSCert,
    AddTrustedCA,
    CAStatus,
    CertStatus,
    GenesisConfig,
    PleadFraud,
    ReportFraud,
    Resolution,
    ResolveFraud,
    RevokeCert,
    Transaction,
    TransactionError,
    TransferToken,
    UntrustCA,
    evidence_message,
    plea_message,
    revocation_message,
    search_certificates,
)
from .sim import ConfigInvalid, ScenarioConfig, random_config, run_simulation

HEADERS_MAGIC = b"CLHDRS01"
DAY = 86400


class CliError(Exception):
    def __init__(self, category: str, detail: str, status: int = 2) -> None:
        super().__init__(detail)
        self.category = category
        self.status = status


# -- file helpers -------------------------------------------------------------


def load_key(path: str) -> KeyPair:
    try:
        data = json.loads(Path(path).read_text())
        return KeyPair.from_private(bytes.fromhex(data["private"]))
    except (OSError, ValueError, KeyError) as exc:
        raise CliError("BadKeyFile", f"{path}: {exc}") from None


def load_public(arg: str) -> bytes:
    """A public key given as hex or as a key file."""
    if os.path.exists(arg):
        try:
            return bytes.fromhex(json.loads(Path(arg).read_text())["public"])
        except (ValueError, KeyError) as exc:
            raise CliError("BadKeyFile", f"{arg}: {exc}") from None
    return _hex(arg, "public key", 32)


def load_cert(path: str) -> Certificate:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CliError("FileError", str(exc)) from None
    try:
        return from_fixture(raw.decode("ascii"))
    except (UnicodeDecodeError, ValueError):
        pass
    try:
        return decode_certificate(raw)
    except (DecodeError, ValueError) as exc:
        raise CliError("BadCertificate", f"{path}: {exc}") from None


def _hex(text: str, what: str, size: int | None = None) -> bytes:
    try:
        value = bytes.fromhex(text)
    except ValueError:
        raise CliError("BadArgument", f"{what} must be hex") from None
    if size is not None and len(value) != size:
        raise CliError("BadArgument", f"{what} must be {size} bytes")
    return value


def cert_id_arg(arg: str) -> bytes:
    """A certificate id given as hex or as a certificate file."""
    if os.path.exists(arg):
        return load_cert(arg).cert_id
    return _hex(arg, "certificate id", 32)


def address_arg(arg: str) -> bytes:
    if os.path.exists(arg):
        return address_of(load_public(arg))
    return _hex(arg, "address", 32)


class Ledger:
    def __init__(self, directory: str) -> None:
        self.dir = Path(directory)
        try:
            self.config = GenesisConfig.from_json((self.dir / "genesis.json").read_text())
        except OSError as exc:
            raise CliError("NoLedger", f"{directory}: {exc}") from None
        except (ValueError, KeyError) as exc:
            raise CliError("BadGenesis", str(exc)) from None
        chain_file = self.dir / "chain.bin"
        self.chain = Chain.load(self.config, chain_file) if chain_file.exists() else Chain(self.config)

    def save(self) -> None:
        self.chain.export(self.dir / "chain.bin")


def write_headers(headers: Sequence[BlockHeader], path: str) -> None:
    w = Writer().raw(HEADERS_MAGIC)
    for h in headers:
        w.raw(h.encode())
    Path(path).write_bytes(w.getvalue())


def read_headers(path: str) -> list[BlockHeader]:
    data = Path(path).read_bytes()
    if data.startswith(HEADERS_MAGIC):
        r = Reader(data[len(HEADERS_MAGIC):])
        headers = []
        while r.remaining:
            headers.append(BlockHeader.decode(r.take(HEADER_SIZE)))
        return headers
    # a full chain file also carries every header
    r = Reader(data)
    if r.take(len(CHAIN_MAGIC)) != CHAIN_MAGIC:
        raise DecodeError("neither a header file nor a chain file")
    headers = []
    while r.remaining:
        headers.append(Block.decode(r.bytes32()).header)
    return headers


def emit(rows: list[dict], fmt: str, out=None) -> None:
    """Print records as JSON lines or tab-separated columns."""
    out = out or sys.stdout
    if fmt == "json":
        for row in rows:
            print(json.dumps(row, sort_keys=True), file=out)
        return
    if not rows:
        return
    cols = list(rows[0])
    print("\t".join(cols), file=out)
    for row in rows:
        print("\t".join("" if row[c] is None else str(row[c]) for c in cols), file=out)


# -- commands -----------------------------------------------------------------


def cmd_keygen(args) -> int:
    kp = KeyPair.from_seed(args.seed) if args.seed is not None else KeyPair.from_private(os.urandom(32))
    doc = {"private": kp.private.hex(), "public": kp.public.hex(), "address": kp.address.hex()}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        os.chmod(args.out, 0o600)
        print(f"public\t{kp.public.hex()}\naddress\t{kp.address.hex()}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_ca_issue(args) -> int:
    issuer_key = load_key(args.issuer_key)
    issuer_cert = load_cert(args.issuer_cert) if args.issuer_cert else None
    subject = load_public(args.subject_key) if args.subject_key else issuer_key.public
    if issuer_cert is None and subject != issuer_key.public:
        raise CliError("BadArgument", "a root certificate must certify the issuer's own key")
    is_ca = args.ca or issuer_cert is None
    sans = args.san or ([] if is_ca else [args.cn])
    serial = (_hex(args.serial, "serial", 16) if args.serial
              else sha256(b"serial", subject, args.cn.encode(), str(args.not_before).encode())[:16])
    try:
        cert = issue_certificate(issuer_key, subject, args.cn, sans, args.not_before,
                                 args.not_before + args.days * DAY, serial,
                                 issuer=issuer_cert, is_ca=is_ca)
    except ValueError as exc:
        raise CliError("BadCertificate", str(exc)) from None
    text = to_fixture(cert)
    if args.out:
        Path(args.out).write_text(text)
        print(f"cert_id\t{cert.cert_id.hex()}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_genesis(args) -> int:
    directory = Path(args.ledger)
    if (directory / "genesis.json").exists() and not args.force:
        raise CliError("LedgerExists", f"{directory} already holds a ledger (use --force)")
    allocations = {}
    for item in args.alloc or []:
        who, sep, amount = item.rpartition("=")
        if not sep:
            raise CliError("BadArgument", f"allocation {item!r} must be KEY=AMOUNT")
        allocations[load_public(who)] = int(amount)
    try:
        config = GenesisConfig(
            board_keys=tuple(load_public(k) for k in args.board),
            threshold=args.threshold,
            foundation_key=load_public(args.foundation),
            total_supply=args.supply,
            allocations=allocations,
            authorities=tuple(sha256(b"authority", bytes([i])) for i in range(args.authorities)),
            timestamp=args.timestamp,
        )
    except ValueError as exc:
        raise CliError("BadGenesis", str(exc)) from None
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "genesis.json").write_text(config.to_json() + "\n")
    chain = Chain(config)
    chain.export(directory / "chain.bin")
    print(f"genesis\t{chain.tip.hash.hex()}\nstate_root\t{chain.state.root.hex()}")
    return 0


def _build_body(args):
    kind = args.tx
    if kind == "add-ca":
        return AddTrustedCA(load_cert(args.cert))
    if kind == "untrust-ca":
        return UntrustCA(cert_id_arg(args.ca))
    if kind == "add-cert":
        return AddTLSCert(load_cert(args.cert))
    if kind == "revoke":
        cid = cert_id_arg(args.cert)
        return RevokeCert(cid, load_key(args.signer_key).sign(revocation_message(cid)))
    if kind == "report":
        fake, genuine = cert_id_arg(args.fake), cert_id_arg(args.genuine)
        reporter = address_of(load_key(args.sender).public)
        sig = load_key(args.genuine_key).sign(evidence_message(fake, reporter))
        return ReportFraud(fake, genuine, sig)
    if kind == "plead":
        doc = sha256(Path(args.document).read_bytes())
        return PleadFraud(args.report, doc, load_key(args.ca_key).sign(plea_message(args.report, doc)))
    if kind == "resolve":
        return ResolveFraud(args.report, Resolution[args.verdict.upper()])
    if kind == "transfer":
        return TransferToken(address_arg(args.to), args.amount)
    raise CliError("BadArgument", f"unknown transaction kind {kind}")


def cmd_submit(args) -> int:
    ledger = Ledger(args.ledger)
    sender = load_key(args.sender)
    body = _build_body(args)
    board = [load_key(k) for k in args.board_key or []]
    acct = ledger.chain.state.account(sender.address)
    nonce = args.nonce if args.nonce is not None else (acct.nonce if acct else 0)
    tx = Transaction.create(sender, nonce, body, board)
    try:
        ledger.chain.submit(tx)
    except PoolError as exc:
        raise CliError(exc.code, str(exc), 1) from None
    when = args.time if args.time is not None else ledger.chain.tip.timestamp + 600
    try:
        result = ledger.chain.produce(when)
    except BlockError as exc:
        raise CliError(exc.code, exc.detail, 1) from None
    if result.dropped:
        _, code = result.dropped[0]
        raise CliError(code, f"transaction {tx.tx_hash.hex()} rejected", 1)
    ledger.save()
    print(f"tx\t{tx.tx_hash.hex()}\nblock\t{result.block.header.number}\n"
          f"state_root\t{result.state.root.hex()}")
    for ev in result.events:
        print(f"event\t{ev.to_line()}")
    return 0


def cmd_query(args) -> int:
    ledger = Ledger(args.ledger)
    state = ledger.chain.state_at(args.block) if args.block is not None else ledger.chain.state
    rows: list[dict] = []
    if args.domain:
        status = {None: None, "live": CertStatus.NOT_REVOKED, "revoked": CertStatus.REVOKED}[args.status]
        for rec in search_certificates(state, args.domain, status):
            rows.append(_cert_row(rec))
    elif args.cert:
        rec = state.cert_record(cert_id_arg(args.cert))
        if rec is None:
            raise CliError("UnknownCert", args.cert, 1)
        rows.append(_cert_row(rec))
    elif args.cas:
        for cid, e in sorted(state.trusted_cas().entries.items()):
            rows.append({"ca_id": cid.hex(), "name": e.certificate.subject_common_name,
                         "status": "Trusted" if e.status is CAStatus.TRUSTED else "Untrusted",
                         "account": e.account.hex(), "added_at_block": e.added_at_block})
    elif args.account:
        addr = address_arg(args.account)
        acct = state.account(addr)
        if acct is None:
            raise CliError("UnknownAccount", addr.hex(), 1)
        rows.append({"address": addr.hex(), "balance": acct.balance, "nonce": acct.nonce})
    elif args.reports:
        for i, rep in enumerate(state.fraud_reports().reports):
            rows.append({"report": i, "fake_cert_id": rep.fake_cert.cert_id.hex(),
                         "genuine_cert_id": rep.genuine_cert_id.hex(), "issuer_id": rep.issuer_id.hex(),
                         "filed_at_block": rep.filed_at_block, "pleaded": rep.plea is not None,
                         "resolution": rep.resolution.name.capitalize()})
    elif args.events:
        rows = [e.to_dict() for e in ledger.chain.events]
        rows = [dict(r, domains=",".join(r["domains"])) for r in rows]
    else:
        tip = ledger.chain.tip
        rows.append({"height": tip.number, "tip_hash": tip.hash.hex(), "state_root": tip.state_root.hex(),
                     "timestamp": tip.timestamp, "supply": state.token().total_supply})
    emit(rows, args.format)
    return 0


def _cert_row(rec) -> dict:
    cert = rec.certificate
    return {"cert_id": rec.cert_id.hex(), "cn": cert.subject_common_name,
            "sans": ",".join(cert.subject_alternative_names), "issuer_id": cert.issuer_id.hex(),
            "not_before": cert.not_before, "not_after": cert.not_after,
            "status": "Revoked" if rec.status is CertStatus.REVOKED else "NotRevoked",
            "added_at_block": rec.added_at_block, "revoked_at_block": rec.revoked_at_block}


def cmd_prove(args) -> int:
    ledger = Ledger(args.ledger)
    target: Certificate | bytes
    target = load_cert(args.cert) if os.path.exists(args.cert) else _hex(args.cert, "certificate id", 32)
    try:
        bundle = retrieve_state_proof(ledger.chain, target, args.block)
    except LookupError as exc:
        category, _, detail = str(exc).partition(": ")
        raise CliError(category, detail, 1) from None
    Path(args.out).write_bytes(bundle.encode())
    print(f"block\t{bundle.block_number}\npresent\t{bundle.record is not None}\n"
          f"proof_nodes\t{len(bundle.proof.path_nodes)}")
    return 0


def cmd_verify(args) -> int:
    try:
        headers = read_headers(args.headers)
        bundle = HandshakeBundle.decode(Path(args.bundle).read_bytes())
    except OSError as exc:
        raise CliError("FileError", str(exc)) from None
    except (DecodeError, ValueError) as exc:
        raise CliError("DecodeError", str(exc)) from None
    if not headers:
        raise CliError("DecodeError", "no headers")
    try:
        client = LightClient(headers[0], args.freshness).sync_headers(headers[1:])
    except SyncError as exc:
        raise CliError(exc.code, str(exc), 1) from None
    now = args.time if args.time is not None else client.headers[client.tip].timestamp
    decision = verify_handshake(client, args.domain, bundle, now)
    print(decision)
    return 0 if decision.accepted else 1


def cmd_run_scenario(args) -> int:
    if args.config:
        try:
            config = ScenarioConfig.from_json(Path(args.config).read_text())
        except OSError as exc:
            raise CliError("FileError", str(exc)) from None
        except (ConfigInvalid, TypeError) as exc:
            raise CliError("ConfigInvalid", str(exc)) from None
    elif args.builtin == "random":
        config = random_config(args.seed, blocks=args.blocks or 1000)
    else:
        config = ScenarioConfig(name=args.builtin, kind=args.builtin, seed=args.seed)
    if args.seed is not None and args.config:
        config.seed = args.seed
    if args.blocks is not None:
        config.blocks = args.blocks
    try:
        config.validate()
    except ConfigInvalid as exc:
        raise CliError("ConfigInvalid", str(exc)) from None
    sim = run_simulation(config)
    report = sim.report
    if args.chain_out:
        sim.chain.export(args.chain_out)
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n")
    if args.events:
        Path(args.events).write_text("".join(json.dumps(e, sort_keys=True) + "\n" for e in report.events))
    for a in report.assertions:
        print(f"{'PASS' if a['passed'] else 'FAIL'}\t{a['name']}\t{a['detail']}")
    print(f"blocks\t{report.blocks}\nevents\t{len(report.events)}\nhandshakes\t{len(report.handshakes)}")
    print(f"state_root\t{report.final_state_root}\nresult\t{'PASS' if report.passed else 'FAIL'}")
    if args.plot_dir:
        from .plotting import plot_scenario
        print(f"figure\t{plot_scenario(report, args.plot_dir)}")
    return 0 if report.passed else 1


def cmd_estimate(args) -> int:
    try:
        params = CapacityParams(
            num_tls_domains=args.domains, cert_size_bytes=args.cert_size,
            avg_cert_lifetime_days=args.lifetime, block_time_seconds=args.block_time,
            header_size_bytes=args.header_size, horizon_days=args.horizon,
            price_per_gb=None if args.no_price else args.price)
    except ValueError as exc:
        raise CliError("ConfigInvalid", str(exc)) from None
    report = estimate_capacity(params)
    if args.format == "json":
        print(report.to_json())
    elif args.format == "tsv":
        rows = {k: v for k, v in report.to_dict().items() if k != "params"}
        for k, v in rows.items():
            print(f"{k}\t{'' if v is None else v}")
    else:
        print(report.to_text())
    if args.reference:
        print()
        for anchor in reference_figures():
            print(anchor)
    if args.plot_dir:
        from .plotting import plot_capacity
        print(f"figure\t{plot_capacity(params, args.plot_dir)}", file=sys.stderr if args.format == "json" else sys.stdout)
    return 0


def cmd_export_chain(args) -> int:
    ledger = Ledger(args.ledger)
    if args.headers_only:
        write_headers(ledger.chain.header_chain(), args.out)
    else:
        ledger.chain.export(args.out)
    if args.events:
        ledger.chain.export_events(args.events)
    print(f"height\t{ledger.chain.height}\ntip\t{ledger.chain.tip.hash.hex()}")
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="certledger", description="Certificate ledger node, client and tools.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("keygen", help="create an Ed25519 key pair")
    s.add_argument("--seed", help="derive the key deterministically from this seed")
    s.add_argument("--out", help="write the key file here (default: stdout)")
    s.set_defaults(func=cmd_keygen)

    s = sub.add_parser("ca-issue", help="issue a root CA or leaf certificate")
    s.add_argument("--issuer-key", required=True)
    s.add_argument("--issuer-cert", help="issuing CA certificate; omit for a self-signed root")
    s.add_argument("--subject-key", help="subject public key or key file")
    s.add_argument("--cn", required=True)
    s.add_argument("--san", action="append", help="subject alternative name (repeatable)")
    s.add_argument("--not-before", type=int, default=1_700_000_000)
    s.add_argument("--days", type=int, default=90)
    s.add_argument("--serial", help="16-byte serial as hex")
    s.add_argument("--ca", action="store_true", help="issue a CA certificate")
    s.add_argument("--out")
    s.set_defaults(func=cmd_ca_issue)

    s = sub.add_parser("genesis", help="create a ledger directory")
    s.add_argument("--ledger", required=True)
    s.add_argument("--board", nargs="+", required=True, help="board member public keys or key files")
    s.add_argument("--threshold", type=int, required=True)
    s.add_argument("--foundation", required=True)
    s.add_argument("--alloc", action="append", help="KEY=AMOUNT initial balance (repeatable)")
    s.add_argument("--supply", type=int, default=10**9)
    s.add_argument("--authorities", type=int, default=1)
    s.add_argument("--timestamp", type=int, default=1_700_000_000)
    s.add_argument("--force", action="store_true")
    s.set_defaults(func=cmd_genesis)

    s = sub.add_parser("submit", help="submit one transaction and produce a block")
    s.add_argument("--ledger", required=True)
    s.add_argument("--sender", required=True, help="sender key file")
    s.add_argument("--board-key", action="append", help="board key file to co-sign with (repeatable)")
    s.add_argument("--nonce", type=int)
    s.add_argument("--time", type=int, help="block timestamp (default: tip + 600 s)")
    txs = s.add_subparsers(dest="tx", required=True)
    t = txs.add_parser("add-ca")
    t.add_argument("--cert", required=True)
    t = txs.add_parser("untrust-ca")
    t.add_argument("--ca", required=True, help="CA certificate file or id")
    t = txs.add_parser("add-cert")
    t.add_argument("--cert", required=True)
    t = txs.add_parser("revoke")
    t.add_argument("--cert", required=True, help="certificate file or id")
    t.add_argument("--signer-key", required=True, help="certificate or issuing CA key file")
    t = txs.add_parser("report")
    t.add_argument("--fake", required=True)
    t.add_argument("--genuine", required=True)
    t.add_argument("--genuine-key", required=True, help="key file of the genuine certificate")
    t = txs.add_parser("plead")
    t.add_argument("--report", type=int, required=True)
    t.add_argument("--document", required=True, help="file whose hash is filed as evidence")
    t.add_argument("--ca-key", required=True)
    t = txs.add_parser("resolve")
    t.add_argument("--report", type=int, required=True)
    t.add_argument("--verdict", choices=["upheld", "dismissed"], required=True)
    t = txs.add_parser("transfer")
    t.add_argument("--to", required=True, help="recipient address or key file")
    t.add_argument("--amount", type=int, required=True)
    s.set_defaults(func=cmd_submit)

    s = sub.add_parser("query", help="read ledger state")
    s.add_argument("--ledger", required=True)
    s.add_argument("--block", type=int)
    s.add_argument("--format", choices=["tsv", "json"], default="tsv")
    s.add_argument("--status", choices=["live", "revoked"])
    what = s.add_mutually_exclusive_group()
    what.add_argument("--domain")
    what.add_argument("--cert")
    what.add_argument("--cas", action="store_true")
    what.add_argument("--account")
    what.add_argument("--reports", action="store_true")
    what.add_argument("--events", action="store_true")
    s.set_defaults(func=cmd_query)

    s = sub.add_parser("prove", help="write a handshake bundle for a certificate")
    s.add_argument("--ledger", required=True)
    s.add_argument("--cert", required=True, help="certificate file or id")
    s.add_argument("--block", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_prove)

    s = sub.add_parser("verify", help="check a handshake bundle as a header-only client")
    s.add_argument("--headers", required=True, help="header file or chain file")
    s.add_argument("--bundle", required=True)
    s.add_argument("--domain", required=True)
    s.add_argument("--time", type=int, help="current time (default: tip timestamp)")
    s.add_argument("--freshness", type=int, default=1)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("run-scenario", help="run a simulated scenario")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("config", nargs="?", help="scenario JSON file")
    src.add_argument("--builtin", choices=["split-world", "rogue-revocation", "random"])
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--blocks", type=int)
    s.add_argument("--report", help="write the JSON report here")
    s.add_argument("--events", help="write the event log (JSON lines) here")
    s.add_argument("--chain-out", help="write the simulated chain file here")
    s.add_argument("--plot-dir")
    s.set_defaults(func=cmd_run_scenario)

    s = sub.add_parser("estimate", help="storage and cost estimates")
    s.add_argument("--domains", type=float, default=CapacityParams.num_tls_domains)
    s.add_argument("--cert-size", type=float, default=CapacityParams.cert_size_bytes)
    s.add_argument("--lifetime", type=float, default=CapacityParams.avg_cert_lifetime_days)
    s.add_argument("--block-time", type=float, default=CapacityParams.block_time_seconds)
    s.add_argument("--header-size", type=float, default=CapacityParams.header_size_bytes,
                   help=f"header bytes (an Ethereum-like header is ~{ETHEREUM_LIKE_HEADER_SIZE:.0f})")
    s.add_argument("--horizon", type=float, default=CapacityParams.horizon_days)
    s.add_argument("--price", type=float, default=CapacityParams.price_per_gb)
    s.add_argument("--no-price", action="store_true")
    s.add_argument("--format", choices=["text", "tsv", "json"], default="text")
    s.add_argument("--reference", action="store_true", help="also compare against the reference figures")
    s.add_argument("--plot-dir")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("export-chain", help="export the chain, headers or event log")
    s.add_argument("--ledger", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--headers-only", action="store_true")
    s.add_argument("--events", help="also write the event log (JSON lines) here")
    s.set_defaults(func=cmd_export_chain)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "command", None) == "run-scenario" and args.seed is None:
        args.seed = 0 if not args.config else None
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return exc.status
    except TransactionError as exc:
        print(f"error: {exc.code}: {exc.detail}", file=sys.stderr)
        return 1
    except BlockError as exc:
        print(f"error: {exc.code}: {exc.detail}", file=sys.stderr)
        return 1
    except DecodeError as exc:
        print(f"error: DecodeError: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: FileError: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
