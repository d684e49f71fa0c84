import pytest

from findmy_verif import p224
from findmy_verif.concrete import ConcreteProvider
from findmy_verif.deduction import can_derive
from findmy_verif.protocol import (
    Beacon,
    DecryptionError,
    FileReportStore,
    PairingRefused,
    ReportStore,
    Simulator,
    derive_epochs,
    emit_beacon,
    finder_make_report,
    owner_decrypt,
    owner_match,
    pair_devices,
    rotate_epoch,
)
from findmy_verif.providers import SymbolicProvider
from findmy_verif.terms import (
    Pair,
    aead_enc,
    di_fn,
    h,
    key_gen,
    nonce_gen,
    normalize,
    pk,
    pub,
    senc,
    sk_fn,
    ss_fn,
    subterm_set,
)


def test_pairing_fresh_and_logged():
    prov = SymbolicProvider()
    master, event = pair_devices(pub("O"), pub("L"), prov)
    assert event[0] == "KeyEst"
    assert event[1] == (pub("O"), pub("L"), master.d0, master.sk0)
    master2, _ = pair_devices(pub("O2"), pub("L2"), prov)
    assert master.d0 != master2.d0 and master.sk0 != master2.sk0


def test_pairing_consumes_roles():
    sim = Simulator(provider=SymbolicProvider())
    sim.add_owner(pub("O"))
    sim.add_lta(pub("L"))
    sim.pair(pub("O"), pub("L"))
    with pytest.raises(PairingRefused):
        sim.pair(pub("O"), pub("L"))


def test_symbolic_epoch_one_shape():
    prov = SymbolicProvider()
    master, _ = pair_devices(pub("O"), pub("L"), prov)
    keys = rotate_epoch(master, prov)
    assert keys.sk == sk_fn(master.sk0)
    assert keys.d == di_fn(master.d0, sk_fn(master.sk0))
    assert keys.p == pk(di_fn(master.d0, sk_fn(master.sk0)))


def test_rotation_deterministic():
    prov = SymbolicProvider()
    master, _ = pair_devices(pub("O"), pub("L"), prov)
    assert rotate_epoch(master, prov) == rotate_epoch(master, prov)
    e1 = rotate_epoch(master, prov)
    assert rotate_epoch(e1, prov) == rotate_epoch(e1, prov)


def test_emit_beacon_event_kinds():
    prov = SymbolicProvider()
    master, _ = pair_devices(pub("O"), pub("L"), prov)
    chain = derive_epochs(master, 3, prov)
    beacon, ev1 = emit_beacon(chain[0])
    assert ev1[0] == "LPFS1"
    assert beacon.p == chain[0].p
    _, ev3 = emit_beacon(chain[2])
    assert ev3[0] == "LPFS2"
    assert ev1[1][:4] == (pub("L"), pub("O"), master.d0, master.sk0)


def test_symbolic_report_matches_wire_shape():
    prov = SymbolicProvider()
    master, _ = pair_devices(pub("O"), pub("L"), prov)
    keys = rotate_epoch(master, prov)
    loc = prov.fresh_payload("loc")
    t_f = prov.fresh_timestamp()
    report, event = finder_make_report(Beacon(keys.p), loc, t_f, prov)

    assert event[0] == "Floc"
    d_f = event[1][1]
    ss = normalize(ss_fn(d_f, keys.p))
    e_key = key_gen(ss, keys.p)
    iv = nonce_gen(ss, keys.p)
    assert report.ciphertext == normalize(
        aead_enc(e_key, Pair(senc(loc, e_key), t_f), iv)
    )
    assert report.ephemeral_pub == pk(d_f)
    assert report.report_id == h(keys.p)


def test_two_reports_fresh_ephemerals():
    prov = SymbolicProvider()
    master, _ = pair_devices(pub("O"), pub("L"), prov)
    keys = rotate_epoch(master, prov)
    beacon = Beacon(keys.p)
    r1, _ = finder_make_report(beacon, prov.fresh_payload("loc"), prov.fresh_timestamp(), prov)
    r2, _ = finder_make_report(beacon, prov.fresh_payload("loc"), prov.fresh_timestamp(), prov)
    assert r1.ephemeral_pub != r2.ephemeral_pub


def test_symbolic_round_trip_and_wrong_epoch():
    prov = SymbolicProvider()
    master, _ = pair_devices(pub("O"), pub("L"), prov)
    chain = derive_epochs(master, 3, prov)
    loc, t_f = prov.fresh_payload("loc"), prov.fresh_timestamp()
    report, _ = finder_make_report(Beacon(chain[1].p), loc, t_f, prov)
    assert owner_decrypt(report, chain[1], prov) == (loc, t_f)
    with pytest.raises(DecryptionError):
        owner_decrypt(report, chain[0], prov)


def test_store_round_trip_and_unknown_digest():
    prov = SymbolicProvider()
    master, _ = pair_devices(pub("O"), pub("L"), prov)
    keys = rotate_epoch(master, prov)
    report, _ = finder_make_report(
        Beacon(keys.p), prov.fresh_payload("loc"), prov.fresh_timestamp(), prov
    )
    store = ReportStore()
    stored = store.store(report, upload_time=9)
    assert stored.upload_time == 9
    assert store.fetch(pub("O"), h(keys.p)) == [stored]
    assert store.fetch(pub("O"), h(pk(prov.fresh_secret("x")))) == []


def test_reports_for_distinct_epochs_stored_independently():
    prov = SymbolicProvider()
    master, _ = pair_devices(pub("O"), pub("L"), prov)
    chain = derive_epochs(master, 2, prov)
    store = ReportStore()
    stored = []
    for keys in chain:
        report, _ = finder_make_report(
            Beacon(keys.p), prov.fresh_payload("loc"), prov.fresh_timestamp(), prov
        )
        stored.append(store.store(report, upload_time=keys.index))
    assert store.fetch(pub("O"), h(chain[0].p)) == [stored[0]]
    assert store.fetch(pub("O"), h(chain[1].p)) == [stored[1]]


def test_owner_match_unique():
    prov = SymbolicProvider()
    master, _ = pair_devices(pub("O"), pub("L"), prov)
    chain = derive_epochs(master, 5, prov)
    digest = prov.digest(chain[1].p)
    assert owner_match(chain, digest, prov) == chain[1]
    assert owner_match(chain, h(pub("foreign")), prov) is None


def test_symbolic_decrypt_needs_ecdh_canonicalization():
    from findmy_verif.terms import NO_ECDH_SYSTEM

    prov = SymbolicProvider(NO_ECDH_SYSTEM)
    master, _ = pair_devices(pub("O"), pub("L"), prov)
    keys = rotate_epoch(master, prov)
    report, _ = finder_make_report(
        Beacon(keys.p), prov.fresh_payload("loc"), prov.fresh_timestamp(), prov
    )
    # both sides compute structurally different shared secrets, so the
    # owner's authenticated decryption is stuck
    with pytest.raises(DecryptionError):
        owner_decrypt(report, keys, prov)


def test_beacons_share_only_secret_material():
    # passive observer of two beacons learns nothing that links them: every
    # common subterm is underivable from the beacons themselves
    prov = SymbolicProvider()
    master, _ = pair_devices(pub("O"), pub("L"), prov)
    chain = derive_epochs(master, 3, prov)
    p1, p2 = chain[0].p, chain[2].p
    common = subterm_set(p1) & subterm_set(p2)
    assert common, "the shared master secrets are common subterms"
    observer = frozenset({p1, p2, pub("O"), pub("L")})
    for t in sorted(common, key=repr):
        assert not can_derive(observer, t, 6)


# -- concrete backend ----------------------------------------------------


def test_concrete_round_trip_several_epochs():
    prov = ConcreteProvider(seed=3)
    master, _ = pair_devices("O", "L", prov)
    chain = derive_epochs(master, 5, prov)
    for keys in chain:
        loc, t_f = prov.fresh_payload("loc"), prov.fresh_timestamp()
        report, _ = finder_make_report(Beacon(keys.p), loc, t_f, prov)
        assert owner_decrypt(report, keys, prov) == (loc, t_f)


def test_concrete_wrong_epoch_fails():
    prov = ConcreteProvider(seed=4)
    master, _ = pair_devices("O", "L", prov)
    chain = derive_epochs(master, 2, prov)
    report, _ = finder_make_report(
        Beacon(chain[1].p), prov.fresh_payload("loc"), prov.fresh_timestamp(), prov
    )
    with pytest.raises(DecryptionError):
        owner_decrypt(report, chain[0], prov)


def test_concrete_tamper_detected():
    prov = ConcreteProvider(seed=5)
    master, _ = pair_devices("O", "L", prov)
    keys = derive_epochs(master, 1, prov)[0]
    report, _ = finder_make_report(
        Beacon(keys.p), prov.fresh_payload("loc"), prov.fresh_timestamp(), prov
    )
    flipped = bytearray(report.ciphertext)
    flipped[3] ^= 0x10
    import dataclasses

    tampered = dataclasses.replace(report, ciphertext=bytes(flipped))
    with pytest.raises(DecryptionError):
        owner_decrypt(tampered, keys, prov)


def test_concrete_key_schedule_valid_scalars_and_distinct_ids():
    prov = ConcreteProvider(seed=6)
    master, _ = pair_devices("O", "L", prov)
    chain = derive_epochs(master, 64, prov)
    ids = set()
    pubs = set()
    for keys in chain:
        assert 1 <= keys.d <= p224.N - 1
        p224.decode_point(keys.p)
        ids.add(prov.digest(keys.p))
        pubs.add(keys.p)
    assert len(ids) == 64
    assert len(pubs) == 64


def test_file_store_persists(tmp_path):
    prov = ConcreteProvider(seed=8)
    master, _ = pair_devices("O", "L", prov)
    keys = derive_epochs(master, 1, prov)[0]
    report, _ = finder_make_report(
        Beacon(keys.p), prov.fresh_payload("loc"), prov.fresh_timestamp(), prov
    )
    path = tmp_path / "reports.jsonl"
    store = FileReportStore(path)
    store.store(report, upload_time=5)

    reloaded = FileReportStore(path)
    fetched = reloaded.fetch("O", report.report_id)
    assert len(fetched) == 1
    assert fetched[0].ciphertext == report.ciphertext
    assert fetched[0].upload_time == 5
    assert owner_decrypt(fetched[0], keys, prov)


def test_simulator_requires_lost_mode():
    prov = SymbolicProvider()
    sim = Simulator(provider=prov)
    sim.add_owner(pub("O"))
    sim.add_lta(pub("L"))
    master = sim.pair(pub("O"), pub("L"))
    keys = rotate_epoch(master, prov)
    with pytest.raises(RuntimeError):
        sim.emit(keys)
    sim.enter_lost_mode(pub("L"))
    beacon = sim.emit(keys)
    assert beacon.p == keys.p
    assert sim.network[-1] == keys.p
