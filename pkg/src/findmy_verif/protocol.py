"""Role logic for the four parties: owner, lost device, finder, server.

The operations here are pure functions of their inputs plus the provider's
fresh values.  Events are returned to the caller (the trace engine or the
simulator), which decides where they land.  Pairing itself is out of band:
nothing it produces touches the adversary-visible network.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .providers import CryptoProvider

Event = tuple[str, tuple]


class PairingRefused(RuntimeError):
    """Role already consumed by an earlier pairing."""


class DecryptionError(RuntimeError):
    """Authentication failed while opening a location report."""

    def __init__(self, stage: str):
        super().__init__(f"decryption failed at stage: {stage}")
        self.stage = stage


@dataclass(frozen=True)
class MasterBeaconKey:
    """Pairing-time secret pair, held identically by owner and lost device."""

    owner_id: Any
    lta_id: Any
    d0: Any
    sk0: Any


@dataclass(frozen=True)
class EpochKeys:
    index: int
    sk: Any
    d: Any
    p: Any
    master: MasterBeaconKey


@dataclass(frozen=True)
class Beacon:
    p: Any
    metadata: bytes = b""


@dataclass(frozen=True)
class LocationReport:
    ciphertext: Any
    ephemeral_pub: Any
    report_id: Any
    upload_time: Optional[int] = None


def pair_devices(owner_id: Any, lta_id: Any, provider: CryptoProvider) -> tuple[MasterBeaconKey, Event]:
    d0 = provider.fresh_secret("d0")
    sk0 = provider.fresh_symkey("SK0")
    master = MasterBeaconKey(owner_id, lta_id, d0, sk0)
    return master, ("KeyEst", (owner_id, lta_id, d0, sk0))


def advance_epoch(
    master: MasterBeaconKey, sk_prev: Any, index: int, provider: CryptoProvider
) -> EpochKeys:
    sk = provider.sk_next(sk_prev)
    d = provider.d_next(master.d0, sk)
    return EpochKeys(index=index, sk=sk, d=d, p=provider.pub_of(d), master=master)


def rotate_epoch(state: MasterBeaconKey | EpochKeys, provider: CryptoProvider) -> EpochKeys:
    """Advance the schedule one epoch.  From the master key this yields epoch
    1; from epoch i it yields epoch i+1.  Owner and lost device run this same
    function on their own copies and stay in lockstep."""
    if isinstance(state, MasterBeaconKey):
        return advance_epoch(state, state.sk0, 1, provider)
    return advance_epoch(state.master, state.sk, state.index + 1, provider)


def derive_epochs(master: MasterBeaconKey, count: int, provider: CryptoProvider) -> list[EpochKeys]:
    out: list[EpochKeys] = []
    state: MasterBeaconKey | EpochKeys = master
    for _ in range(count):
        state = rotate_epoch(state, provider)
        out.append(state)
    return out


def emit_beacon(keys: EpochKeys) -> tuple[Beacon, Event]:
    """Beacon payload is exactly the epoch public key.  The event kind keeps
    the base case and the inductive case apart."""
    kind = "LPFS1" if keys.index == 1 else "LPFS2"
    m = keys.master
    return Beacon(keys.p), (kind, (m.lta_id, m.owner_id, m.d0, m.sk0, keys.d, keys.sk))


def finder_make_report(
    beacon: Beacon,
    loc: Any,
    t_f: Any,
    provider: CryptoProvider,
) -> tuple[LocationReport, Event]:
    """Seal a sighting against whatever public key the beacon carried.  The
    finder cannot authenticate beacons, so no validation happens here beyond
    the key being well formed."""
    d_f = provider.fresh_secret("d_f")
    shared = provider.ecdh(d_f, beacon.p)
    e_key = provider.key_of(shared, beacon.p)
    iv = provider.iv_of(shared, beacon.p)
    inner = provider.sym_seal(loc, e_key)
    ciphertext = provider.aead_seal(e_key, provider.wrap_payload(inner, t_f), iv)
    report = LocationReport(
        ciphertext=ciphertext,
        ephemeral_pub=provider.pub_of(d_f),
        report_id=provider.digest(beacon.p),
    )
    return report, ("Floc", (loc, d_f, beacon.p))


def owner_match(epochs: list[EpochKeys], digest: Any, provider: CryptoProvider) -> Optional[EpochKeys]:
    for keys in epochs:
        if provider.digest(keys.p) == digest:
            return keys
    return None


def owner_decrypt(report: LocationReport, keys: EpochKeys, provider: CryptoProvider) -> tuple[Any, Any]:
    """Recompute the shared secret from the finder's ephemeral key and this
    epoch's private scalar, then peel both encryption layers."""
    shared = provider.ecdh(keys.d, report.ephemeral_pub)
    e_key = provider.key_of(shared, keys.p)
    iv = provider.iv_of(shared, keys.p)
    plain = provider.aead_open(e_key, report.ciphertext, iv)
    if plain is None:
        raise DecryptionError("aead_open")
    parts = provider.unwrap_payload(plain)
    if parts is None:
        raise DecryptionError("payload_split")
    inner, t_f = parts
    loc = provider.sym_open(inner, e_key)
    if loc is None:
        raise DecryptionError("sym_open")
    return loc, t_f


class ReportStore:
    """Server-side index from report id to the reports filed under it."""

    def __init__(self):
        self._by_id: dict[Any, list[LocationReport]] = {}

    def store(self, report: LocationReport, upload_time: int) -> LocationReport:
        stored = dataclasses.replace(report, upload_time=upload_time)
        self._by_id.setdefault(self._key(report.report_id), []).append(stored)
        return stored

    def fetch(self, owner_id: Any, digest: Any) -> list[LocationReport]:
        # owner_id arrives over the authenticated channel; retrieval itself
        # is a straight index lookup, empty when nothing matches.
        return list(self._by_id.get(self._key(digest), []))

    @staticmethod
    def _key(digest: Any):
        return digest.hex() if isinstance(digest, bytes) else digest


class FileReportStore(ReportStore):
    """Append-only JSONL persistence for the concrete backend; one object per
    stored report, keyed by hex report id."""

    def __init__(self, path: str | Path):
        super().__init__()
        self.path = Path(path)
        if self.path.exists():
            for line in self.path.read_text().splitlines():
                if not line.strip():
                    continue
                rec = json.loads(line)
                report = LocationReport(
                    ciphertext=bytes.fromhex(rec["ciphertext"]),
                    ephemeral_pub=bytes.fromhex(rec["ephemeral_pub"]),
                    report_id=bytes.fromhex(rec["report_id"]),
                    upload_time=rec["upload_time"],
                )
                self._by_id.setdefault(rec["report_id"], []).append(report)

    def store(self, report: LocationReport, upload_time: int) -> LocationReport:
        stored = super().store(report, upload_time)
        rec = {
            "report_id": stored.report_id.hex(),
            "ciphertext": stored.ciphertext.hex(),
            "ephemeral_pub": stored.ephemeral_pub.hex(),
            "upload_time": stored.upload_time,
        }
        with self.path.open("a") as fh:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        return stored


@dataclass
class Simulator:
    """Single honest world for demos and tests: tracks consumable roles, the
    network, the event log, and a report store."""

    provider: CryptoProvider
    store: ReportStore = field(default_factory=ReportStore)
    network: list = field(default_factory=list)
    log: list[Event] = field(default_factory=list)
    clock: int = 0
    _owners: set = field(default_factory=set)
    _ltas: set = field(default_factory=set)
    _lost: set = field(default_factory=set)

    def add_owner(self, name: Any) -> None:
        self._owners.add(name)

    def add_lta(self, name: Any) -> None:
        self._ltas.add(name)

    def pair(self, owner_id: Any, lta_id: Any) -> MasterBeaconKey:
        if owner_id not in self._owners or lta_id not in self._ltas:
            raise PairingRefused(f"role not available for {owner_id!r}/{lta_id!r}")
        self._owners.discard(owner_id)
        self._ltas.discard(lta_id)
        master, event = pair_devices(owner_id, lta_id, self.provider)
        self.log.append(event)
        return master

    def enter_lost_mode(self, lta_id: Any) -> None:
        self._lost.add(lta_id)

    def emit(self, keys: EpochKeys) -> Beacon:
        if keys.master.lta_id not in self._lost:
            raise RuntimeError("device is not in lost mode")
        beacon, event = emit_beacon(keys)
        self.log.append(event)
        self.network.append(beacon.p)
        return beacon

    def find_and_report(self, beacon: Beacon, loc: Any) -> LocationReport:
        t_f = self.provider.fresh_timestamp()
        report, event = finder_make_report(beacon, loc, t_f, self.provider)
        self.log.append(event)
        self.network.append((report.ciphertext, report.ephemeral_pub, report.report_id))
        self.clock += 1
        return self.store.store(report, upload_time=self.clock)
