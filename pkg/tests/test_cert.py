import dataclasses

import pytest
from hypothesis import given, settings, strategies as st

from certledger.cert import (
    MAX_TLS_LIFETIME,
    Certificate,
    KeyUsage,
    Verdict,
    build_trusted_path,
    decode_certificate,
    encode_certificate,
    from_fixture,
    issue_certificate,
    to_fixture,
    validate_ca_profile,
    validate_tls_profile,
)
from certledger.codec import DecodeError
from certledger.crypto import KeyPair

T0 = 1_700_000_000
DAY = 86400
CA_KEY = KeyPair.from_seed("cert-tests/ca")
CA = issue_certificate(CA_KEY, CA_KEY.public, "Root", [], T0 - DAY, T0 + 3650 * DAY, b"\x01" * 16, is_ca=True)
LEAF_KEY = KeyPair.from_seed("cert-tests/leaf")


def leaf(**kw) -> Certificate:
    args = dict(common_name="example.com", sans=["example.com", "www.example.com"],
                not_before=T0, not_after=T0 + 90 * DAY, serial=b"\x02" * 16)
    args.update(kw)
    return issue_certificate(CA_KEY, LEAF_KEY.public, args["common_name"], args["sans"],
                             args["not_before"], args["not_after"], args["serial"], issuer=CA)


dns_label = st.from_regex(r"[a-z0-9]([a-z0-9-]{0,10}[a-z0-9])?", fullmatch=True)
dns_name = st.lists(dns_label, min_size=1, max_size=4).map(".".join)
certs = st.builds(
    Certificate,
    serial=st.binary(min_size=16, max_size=16),
    subject_common_name=st.text(max_size=40),
    subject_alternative_names=st.lists(dns_name, max_size=5).map(tuple),
    issuer_id=st.binary(min_size=32, max_size=32),
    not_before=st.integers(0, 2**64 - 1),
    not_after=st.integers(0, 2**64 - 1),
    public_key=st.sampled_from([32, 33]).flatmap(lambda n: st.binary(min_size=n, max_size=n)),
    is_ca=st.booleans(),
    key_usage=st.sampled_from(list(KeyUsage)),
    signature=st.binary(max_size=80),
)


@settings(max_examples=300)
@given(certs)
def test_round_trip(cert):
    data = encode_certificate(cert)
    again = decode_certificate(data)
    assert again == cert
    assert encode_certificate(again) == data
    assert again.cert_id == cert.cert_id


def test_cert_id_changes_with_every_field():
    base = leaf()
    variants = [
        dataclasses.replace(base, serial=b"\x03" * 16),
        dataclasses.replace(base, subject_common_name="other.com"),
        dataclasses.replace(base, subject_alternative_names=("example.com",)),
        dataclasses.replace(base, not_after=base.not_after + 1),
        dataclasses.replace(base, is_ca=True),
        dataclasses.replace(base, signature=bytes(64)),
    ]
    assert len({base.cert_id, *(v.cert_id for v in variants)}) == len(variants) + 1


def test_every_bit_flip_is_detected():
    cert = leaf()
    data = encode_certificate(cert)
    for i in range(len(data)):
        for bit in range(8):
            mutated = bytearray(data)
            mutated[i] ^= 1 << bit
            try:
                other = decode_certificate(bytes(mutated))
            except DecodeError:
                continue
            # a mutation that still decodes yields a different certificate
            # that no longer chains to the issuing CA
            assert other.cert_id != cert.cert_id
            assert build_trusted_path(other, [CA]) != CA


def test_trailing_bytes_rejected():
    with pytest.raises(DecodeError):
        decode_certificate(encode_certificate(leaf()) + b"\x00")


def test_structural_constraints():
    with pytest.raises(ValueError):
        dataclasses.replace(leaf(), serial=b"short")
    with pytest.raises(ValueError):
        dataclasses.replace(leaf(), public_key=bytes(31))
    with pytest.raises(ValueError):
        dataclasses.replace(leaf(), subject_alternative_names=("exämple.com",))


def test_tls_profile_valid():
    assert validate_tls_profile(leaf(), T0 + DAY).ok


@pytest.mark.parametrize("now, verdict", [
    (T0 - 1, Verdict.NOT_YET_VALID),
    (T0 + 91 * DAY, Verdict.EXPIRED),
])
def test_tls_period(now, verdict):
    assert validate_tls_profile(leaf(), now).verdict is verdict


@pytest.mark.parametrize("cert", [
    pytest.param(lambda: leaf(sans=[]), id="no-sans"),
    pytest.param(lambda: leaf(sans=["Bad_Name.com"]), id="bad-dns"),
    pytest.param(lambda: leaf(not_after=T0 + MAX_TLS_LIFETIME + 1), id="too-long"),
    pytest.param(lambda: dataclasses.replace(leaf(), is_ca=True), id="is-ca"),
    pytest.param(lambda: dataclasses.replace(leaf(), key_usage=KeyUsage.NONE), id="no-usage"),
    pytest.param(lambda: dataclasses.replace(leaf(), key_usage=KeyUsage.DIGITAL_SIGNATURE | KeyUsage.CERT_SIGN),
                 id="cert-sign"),
])
def test_tls_profile_violations(cert):
    assert validate_tls_profile(cert(), T0 + DAY).verdict is Verdict.PROFILE_VIOLATION


def test_lifetime_boundary():
    assert validate_tls_profile(leaf(not_after=T0 + MAX_TLS_LIFETIME), T0 + DAY).ok


def test_ca_profile():
    assert validate_ca_profile(CA, T0).ok
    assert validate_ca_profile(leaf(), T0 + DAY).verdict is Verdict.PROFILE_VIOLATION
    assert validate_ca_profile(CA, T0 + 3651 * DAY).verdict is Verdict.EXPIRED


def test_trusted_path():
    cert = leaf()
    assert build_trusted_path(cert, [CA]) == CA
    assert build_trusted_path(cert, []).verdict is Verdict.UNKNOWN_ISSUER
    forged = dataclasses.replace(cert, signature=bytes(64))
    assert build_trusted_path(forged, [CA]).verdict is Verdict.BAD_SIGNATURE


def test_domain_coverage_is_case_insensitive():
    cert = leaf()
    assert cert.covers("WWW.Example.com")
    assert not cert.covers("mail.example.com")


def test_fixture_round_trip():
    cert = leaf()
    assert from_fixture(to_fixture(cert)) == cert
    assert from_fixture(to_fixture(CA)) == CA


def test_fixture_errors():
    with pytest.raises(ValueError):
        from_fixture("serial: 00\n")
    with pytest.raises(ValueError):
        from_fixture(to_fixture(leaf()) + "colour: blue\n")
