import json

import pytest

from certledger.sim import (
    ConfigInvalid,
    ScenarioConfig,
    Simulation,
    attack_rogue_revocation,
    attack_split_world,
    random_config,
    run_scenario,
    watch_events,
)
from certledger.state import EventKind


def test_split_world_attack():
    report = attack_split_world(ScenarioConfig(seed=3, victims=20))
    assert report.passed, report.failures()
    adversary = [h for h in report.handshakes if h["source"].startswith("adversary")]
    assert len(adversary) == 40
    assert all(h["decision"] == "Reject(ProofInvalid)" for h in adversary)


def test_rogue_revocation():
    report = attack_rogue_revocation(ScenarioConfig(seed=5))
    assert report.passed, report.failures()
    assert [o["result"] for o in report.outcomes if o["do"] == "revoke"] == ["error:UnauthorizedRevoker", "ok"]


def test_random_scenario_holds_invariants():
    report = run_scenario(random_config(11, blocks=200))
    assert report.passed, report.failures()
    assert report.blocks == 200
    assert any(h["source"] == "full-node" for h in report.handshakes)


def test_reports_are_deterministic():
    a = run_scenario(random_config(2, blocks=120)).to_json()
    b = run_scenario(random_config(2, blocks=120)).to_json()
    assert a == b
    assert run_scenario(random_config(3, blocks=120)).to_json() != a


def test_scripted_expectation_failure_is_reported():
    cfg = ScenarioConfig(actions=[
        {"at": 1, "do": "add_ca", "ca": "ca0", "signers": [0], "expect": "ok"},
    ])
    report = run_scenario(cfg)
    assert not report.passed
    assert report.outcomes[0]["result"] == "error:BelowThreshold"


def test_scripted_scenario_from_json():
    text = json.dumps({
        "name": "scripted", "seed": 9, "domains": ["a.example"],
        "actions": [
            {"at": 1, "do": "add_ca", "ca": "ca0", "expect": "ok"},
            {"at": 1, "do": "watch", "domain": "a.example"},
            {"at": 2, "do": "issue", "cert": "c", "ca": "ca0"},
            {"at": 2, "do": "add_cert", "cert": "c", "expect": "ok"},
            {"at": 3, "do": "expect_notification", "domain": "a.example", "kind": "CertAdded"},
            {"at": 3, "do": "handshake", "cert": "c", "expect": "Accept"},
            {"at": 3, "do": "handshake", "cert": "c", "domain": "b.example", "expect": "oracle"},
            {"at": 3, "do": "transfer", "from": "owner:a.example", "to": "new:x", "amount": 5, "expect": "ok"},
            {"at": 4, "do": "untrust_ca", "ca": "ca0", "expect": "ok"},
            {"at": 5, "do": "expect_status", "cert": "c", "status": "Revoked"},
            {"at": 5, "do": "expect_ca", "ca": "ca0", "status": "Untrusted"},
            {"at": 5, "do": "expect_notification", "domain": "a.example", "kind": "CertRevoked", "cert": "c"},
        ],
    })
    report = run_scenario(ScenarioConfig.from_json(text))
    assert report.passed, report.failures()


@pytest.mark.parametrize("bad", [
    {"kind": "nope"},
    {"threshold": 4, "board_size": 3},
    {"block_time": 0},
    {"unknown_field": 1},
    {"actions": [{"at": 1, "do": "fly"}]},
    {"actions": [{"at": 1}]},
    {"kind": "split-world", "cas": 1},
    {"fees": {"NOPE": 1}},
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigInvalid):
        ScenarioConfig.from_dict(bad)


def test_config_json_round_trip():
    cfg = random_config(4, blocks=10)
    assert ScenarioConfig.from_json(cfg.to_json()) == cfg


def test_watcher_replays_history_and_follows():
    sim = Simulation(ScenarioConfig(seed=1, domains=["w.example"]))
    sim.perform({"do": "add_ca", "ca": "ca0"})
    sim.produce()
    sim.perform({"do": "issue", "cert": "a", "ca": "ca0"})
    sim.perform({"do": "add_cert", "cert": "a"})
    sim.produce()
    late = watch_events(sim.chain, "W.EXAMPLE")
    assert late.kinds() == [EventKind.CERT_ADDED]
    sim.perform({"do": "revoke", "cert": "a", "signer": "issuer", "by": "ca:ca0"})
    sim.produce()
    assert late.kinds() == [EventKind.CERT_ADDED, EventKind.CERT_REVOKED]
    assert late.notifications[-1].lag == 0
    other = watch_events(sim.chain, "other.example")
    assert other.notifications == []
