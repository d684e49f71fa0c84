"""Bounded execution of the protocol as a multiset-rewriting system.

The global state is a multiset of facts.  Temporary facts are consumed by the
rule that uses them; the server fact is persistent.  Rules fire against the
current multiset, append their events to the trace at the next timestamp, and
put their outputs on the adversary-visible network (the knowledge base).
`TraceEngine` enumerates every maximal firing sequence reachable under the
scenario bounds, depth first and in a canonical order, with apply/undo so the
whole search shares one mutable state.

Two documented reductions keep the interleaving count workable, both with off
switches:
  * symmetry: interchangeable role facts (two idle finder slots, unpaired
    owner/device pairs) are consumed in canonical order only;
  * fusion: the server-receive and owner-query rules are deterministic
    reactions with no adversary choice, so they fire eagerly as ordinary
    steps instead of branching the search.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Any, Callable, Optional

from . import protocol
from .deduction import derivable_cached
from .providers import CryptoProvider, SymbolicProvider
from .terms import DEFAULT_SYSTEM, PublicName, RewriteSystem, Term, render, tuple_term

REVEAL_KINDS = ("d0", "SK0", "di", "ski")


@dataclass(frozen=True)
class ScenarioBounds:
    """Finite envelope for one enumeration.  Reveal rules are opt-in per
    kind; the deduction depth caps adversary synthesis everywhere, and the
    injection bound caps it for network inputs fed back into rules."""

    max_sessions: int = 1
    max_epochs: int = 3
    max_reports: int = 2
    reveals: frozenset[str] = frozenset()
    deduction_depth: int = 6
    injection_bound: int = 4

    def __post_init__(self):
        for kind in self.reveals:
            if kind not in REVEAL_KINDS:
                raise ValueError(f"unknown reveal kind {kind!r}")
        for name in ("max_sessions", "max_epochs", "max_reports",
                     "deduction_depth", "injection_bound"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


DEFAULT_BOUNDS = ScenarioBounds()

Fact = tuple
Event = tuple[str, tuple]

_RULE_ORDER = {
    "GenKeys": 0,
    "Reveal_d0": 1,
    "Reveal_SK0": 2,
    "L_1": 3,
    "L_2": 4,
    "Reveal_di": 5,
    "Reveal_ski": 6,
    "F_1": 7,
    "S_1": 8,
    "O_query": 9,
}

REACTIVE_RULES = ("S_1", "O_query")


@dataclass(frozen=True)
class RuleInstance:
    rule: str
    data: tuple

    def sort_key(self):
        return (_RULE_ORDER[self.rule], tuple(param_render(x) for x in self.data))


@dataclass(frozen=True)
class Step:
    index: int
    rule: str
    events: tuple[Event, ...]
    consumed: tuple[Fact, ...]
    produced: tuple[Fact, ...]
    observed: tuple[Any, ...]


def param_render(value: Any) -> str:
    if isinstance(value, Term):
        return render(value)
    if isinstance(value, bytes):
        return value.hex()
    return str(value)


def render_fact(fact: Fact) -> str:
    name, *params = fact
    if not params:
        return str(name)
    return f"{name}({','.join(param_render(p) for p in params)})"


def render_event(event: Event) -> str:
    kind, params = event
    return f"{kind}({','.join(param_render(p) for p in params)})"


@dataclass
class _Undo:
    consumed: tuple[Fact, ...]
    produced: tuple[Fact, ...]
    observed: int
    events: int
    lpfs: int
    reveal_key: Optional[tuple]
    epoch_key: Optional[Any]
    reports_delta: int
    provider_token: Any


class TraceEngine:
    """One scenario's mutable search state plus the rule set."""

    def __init__(
        self,
        bounds: ScenarioBounds = DEFAULT_BOUNDS,
        *,
        backend: str = "symbolic",
        system: RewriteSystem = DEFAULT_SYSTEM,
        provider: CryptoProvider | None = None,
        symmetry: bool = True,
    ):
        if backend not in ("symbolic", "concrete"):
            raise ValueError(f"unknown backend {backend!r}")
        self.bounds = bounds
        self.backend = backend
        self.system = system
        self.symmetry = symmetry
        if provider is None:
            if backend == "symbolic":
                provider = SymbolicProvider(system)
            else:
                from .concrete import ConcreteProvider

                provider = ConcreteProvider(seed=0)
        self.provider = provider

        name = self._name
        self.server = name("S")
        self.facts: Counter = Counter()
        if bounds.max_sessions == 1:
            self.facts[("Owner", name("O"))] += 1
            self.facts[("LTA", name("L"))] += 1
        else:
            for i in range(1, bounds.max_sessions + 1):
                self.facts[("Owner", name(f"O{i}"))] += 1
                self.facts[("LTA", name(f"L{i}"))] += 1
        for i in range(1, bounds.max_reports + 1):
            self.facts[("Finder", name(f"F{i}"))] += 1
        self.facts[("!Server", self.server)] += 1

        self.agent_names = sorted(
            (f[1] for f in self.facts), key=param_render
        )
        # Adversary state exists only symbolically; concrete runs carry an
        # empty knowledge base and never evaluate knowledge atoms.
        base = frozenset(self.agent_names) if backend == "symbolic" else frozenset()
        self._kb_stack: list[frozenset] = [base]
        self.events_flat: list[tuple[int, str, tuple]] = []
        self.steps: list[Step] = []
        self._lpfs: list[tuple] = []  # (owner, lta, d_i, sk_i) in firing order
        self._reveals_fired: set[tuple] = set()
        self._epochs_used: Counter = Counter()
        self._reports_used = 0
        self._undo: list[_Undo] = []
        self._epoch_cache: dict = {}
        self._decrypt_cache: dict = {}

    def _name(self, label: str):
        return PublicName(label) if self.backend == "symbolic" else label

    # -- views ------------------------------------------------------------

    @property
    def kb_now(self) -> frozenset:
        return self._kb_stack[-1]

    def derivable(self, target: Term, depth: int | None = None) -> bool:
        if self.backend != "symbolic":
            raise RuntimeError("knowledge queries need the symbolic backend")
        bound = self.bounds.deduction_depth if depth is None else depth
        return derivable_cached(self.kb_now, target, bound, self.system)

    def trace_length(self) -> int:
        return len(self.steps)

    # -- rule instance generation -----------------------------------------

    def branching_instances(self) -> list[RuleInstance]:
        out: list[RuleInstance] = []
        self._gen_genkeys(out)
        self._gen_reveal_master(out)
        self._gen_lost_device(out)
        self._gen_reveal_epoch(out)
        self._gen_finder(out)
        return sorted(out, key=RuleInstance.sort_key)

    def reactive_instances(self) -> list[RuleInstance]:
        out: list[RuleInstance] = []
        self._gen_server(out)
        self._gen_owner(out)
        return sorted(out, key=RuleInstance.sort_key)

    def enabled_steps(self) -> list[RuleInstance]:
        """Every rule instance that can fire from the current state."""
        return sorted(
            self.branching_instances() + self.reactive_instances(),
            key=RuleInstance.sort_key,
        )

    def _facts_named(self, name: str) -> list[Fact]:
        return sorted(
            (f for f, n in self.facts.items() if n > 0 and f[0] == name),
            key=render_fact,
        )

    def _gen_genkeys(self, out: list[RuleInstance]) -> None:
        owners = self._facts_named("Owner")
        ltas = self._facts_named("LTA")
        if self.symmetry:
            # Unpaired roles are interchangeable; fix the pairing order.
            owners = owners[:1]
            ltas = ltas[:1]
        for o in owners:
            for l in ltas:
                out.append(RuleInstance("GenKeys", (o[1], l[1])))

    def _gen_reveal_master(self, out: list[RuleInstance]) -> None:
        for fact in self._facts_named("Lkd"):
            _, lta, owner, d0, sk0 = fact
            if "d0" in self.bounds.reveals and ("LtkReveal_d0", d0) not in self._reveals_fired:
                out.append(RuleInstance("Reveal_d0", fact[1:]))
            if "SK0" in self.bounds.reveals and ("LtkReveal_SK0", sk0) not in self._reveals_fired:
                out.append(RuleInstance("Reveal_SK0", fact[1:]))

    def _gen_lost_device(self, out: list[RuleInstance]) -> None:
        for fact in self._facts_named("Lkd"):
            _, lta, owner, d0, sk0 = fact
            if self._epochs_used[self._skey(d0)] < self.bounds.max_epochs:
                out.append(RuleInstance("L_1", fact[1:]))
        for fact in self._facts_named("L_2"):
            _, owner, lta, d0, sk0, sk_i, index = fact
            if self._epochs_used[self._skey(d0)] < self.bounds.max_epochs:
                out.append(RuleInstance("L_2", fact[1:]))

    def _gen_reveal_epoch(self, out: list[RuleInstance]) -> None:
        if not (self.bounds.reveals & {"di", "ski"}):
            return
        for owner, lta, d_i, sk_i in self._lpfs:
            if "di" in self.bounds.reveals and ("Reveal_di", d_i) not in self._reveals_fired:
                out.append(RuleInstance("Reveal_di", (owner, lta, d_i)))
            if "ski" in self.bounds.reveals and ("Reveal_ski", sk_i) not in self._reveals_fired:
                out.append(RuleInstance("Reveal_ski", (owner, lta, sk_i)))

    def _gen_finder(self, out: list[RuleInstance]) -> None:
        if self._reports_used >= self.bounds.max_reports:
            return
        finders = self._facts_named("Finder")
        if not finders:
            return
        if self.symmetry:
            finders = finders[:1]  # idle finder slots are interchangeable
        for fact in self._facts_named("Fin_1"):
            beacon_pub = fact[1]
            # The rule consumes the beacon straight off the network, so the
            # adversary must be able to produce it at the injection bound.
            if self.backend == "symbolic" and not derivable_cached(
                self.kb_now, beacon_pub, self.bounds.injection_bound, self.system
            ):
                continue
            for finder in finders:
                out.append(RuleInstance("F_1", (beacon_pub, finder[1])))

    def _gen_server(self, out: list[RuleInstance]) -> None:
        for fact in self._facts_named("F_upload"):
            out.append(RuleInstance("S_1", fact[1:]))

    def _gen_owner(self, out: list[RuleInstance]) -> None:
        stores = self._facts_named("SStore")
        if not stores:
            return
        for okd in self._facts_named("Okd"):
            _, owner, lta, d0, sk0 = okd
            for store in stores:
                _, server, ct, pf, rid = store
                match = self._owner_attempt(owner, lta, d0, sk0, ct, pf, rid)
                if match is not None:
                    loc, t_f = match
                    out.append(
                        RuleInstance(
                            "O_query", (owner, lta, d0, sk0, server, ct, pf, rid, loc, t_f)
                        )
                    )

    def _skey(self, d0: Any):
        return d0 if not isinstance(d0, bytes) else d0.hex()

    def _owner_epochs(self, owner, lta, d0, sk0) -> list[protocol.EpochKeys]:
        key = (param_render(owner), param_render(lta), self._skey(d0))
        hit = self._epoch_cache.get(key)
        if hit is None:
            master = protocol.MasterBeaconKey(owner, lta, d0, sk0)
            hit = protocol.derive_epochs(master, self.bounds.max_epochs, self.provider)
            self._epoch_cache[key] = hit
        return hit

    def _owner_attempt(self, owner, lta, d0, sk0, ct, pf, rid):
        """Match the stored report against the owner's epoch list and try to
        decrypt.  None when no epoch hash matches or authentication fails."""
        cache_key = (self._skey(d0), param_render(ct), param_render(pf), param_render(rid))
        if cache_key in self._decrypt_cache:
            return self._decrypt_cache[cache_key]
        epochs = self._owner_epochs(owner, lta, d0, sk0)
        keys = protocol.owner_match(epochs, rid, self.provider)
        result = None
        if keys is not None:
            report = protocol.LocationReport(ciphertext=ct, ephemeral_pub=pf, report_id=rid)
            try:
                result = protocol.owner_decrypt(report, keys, self.provider)
            except protocol.DecryptionError:
                result = None
        self._decrypt_cache[cache_key] = result
        return result

    # -- firing -------------------------------------------------------------

    def apply(self, inst: RuleInstance) -> Step:
        token = self.provider.checkpoint()
        handler = getattr(self, f"_apply_{inst.rule.lower()}")
        consumed, produced, events, observed, reveal_key, epoch_key, reports_delta = handler(
            inst.data
        )
        for fact in consumed:
            if self.facts[fact] <= 0:
                raise RuntimeError(f"consuming absent fact {render_fact(fact)}")
            self.facts[fact] -= 1
        for fact in produced:
            self.facts[fact] += 1

        index = len(self.steps) + 1
        step = Step(
            index=index,
            rule=inst.rule,
            events=tuple(events),
            consumed=tuple(consumed),
            produced=tuple(produced),
            observed=tuple(observed),
        )
        self.steps.append(step)
        for kind, params in events:
            self.events_flat.append((index, kind, params))
        observed_count = 0
        if self.backend == "symbolic":
            kb = self._kb_stack[-1]
            for msg in observed:
                kb = kb | {msg}
            if observed:
                self._kb_stack.append(kb)
                observed_count = 1
        lpfs_added = 0
        for kind, params in events:
            if kind in ("LPFS1", "LPFS2"):
                self._lpfs.append((params[1], params[0], params[4], params[5]))
                lpfs_added += 1
        if reveal_key is not None:
            self._reveals_fired.add(reveal_key)
        if epoch_key is not None:
            self._epochs_used[epoch_key] += 1
        self._reports_used += reports_delta

        self._undo.append(
            _Undo(
                consumed=tuple(consumed),
                produced=tuple(produced),
                observed=observed_count,
                events=len(events),
                lpfs=lpfs_added,
                reveal_key=reveal_key,
                epoch_key=epoch_key,
                reports_delta=reports_delta,
                provider_token=token,
            )
        )
        return step

    def undo(self) -> None:
        entry = self._undo.pop()
        self.steps.pop()
        for _ in range(entry.events):
            self.events_flat.pop()
        for _ in range(entry.observed):
            self._kb_stack.pop()
        for _ in range(entry.lpfs):
            self._lpfs.pop()
        for fact in entry.produced:
            self.facts[fact] -= 1
        for fact in entry.consumed:
            self.facts[fact] += 1
        if entry.reveal_key is not None:
            self._reveals_fired.discard(entry.reveal_key)
        if entry.epoch_key is not None:
            self._epochs_used[entry.epoch_key] -= 1
        self._reports_used -= entry.reports_delta
        self.provider.restore(entry.provider_token)

    # Rule bodies.  Each returns (consumed, produced, events, observed,
    # reveal_key, epoch_key, reports_delta).

    def _apply_genkeys(self, data):
        owner, lta = data
        master, event = protocol.pair_devices(owner, lta, self.provider)
        return (
            [("Owner", owner), ("LTA", lta)],
            [
                ("Okd", owner, lta, master.d0, master.sk0),
                ("Lkd", lta, owner, master.d0, master.sk0),
            ],
            [event],
            [],
            None,
            None,
            0,
        )

    def _apply_reveal_d0(self, data):
        lta, owner, d0, sk0 = data
        fact = ("Lkd", lta, owner, d0, sk0)
        return (
            [fact],
            [fact],
            [("LtkReveal_d0", (owner, lta, d0))],
            [d0],
            ("LtkReveal_d0", d0),
            None,
            0,
        )

    def _apply_reveal_sk0(self, data):
        lta, owner, d0, sk0 = data
        fact = ("Lkd", lta, owner, d0, sk0)
        return (
            [fact],
            [fact],
            [("LtkReveal_SK0", (owner, lta, sk0))],
            [sk0],
            ("LtkReveal_SK0", sk0),
            None,
            0,
        )

    def _apply_l_1(self, data):
        lta, owner, d0, sk0 = data
        master = protocol.MasterBeaconKey(owner, lta, d0, sk0)
        keys = protocol.rotate_epoch(master, self.provider)
        _beacon, lpfs_event = protocol.emit_beacon(keys)
        return (
            [("Lkd", lta, owner, d0, sk0)],
            [
                ("Fin_1", keys.p),
                ("L_2", owner, lta, d0, sk0, keys.sk, 1),
            ],
            [lpfs_event, ("Ok_s", (lta, owner, d0, sk0))],
            [keys.p],
            None,
            self._skey(d0),
            0,
        )

    def _apply_l_2(self, data):
        owner, lta, d0, sk0, sk_i, index = data
        master = protocol.MasterBeaconKey(owner, lta, d0, sk0)
        keys = protocol.advance_epoch(master, sk_i, index + 1, self.provider)
        _beacon, lpfs_event = protocol.emit_beacon(keys)
        return (
            [("L_2", owner, lta, d0, sk0, sk_i, index)],
            [
                ("Fin_1", keys.p),
                ("L_2", owner, lta, d0, sk0, keys.sk, keys.index),
            ],
            [lpfs_event],
            [keys.p],
            None,
            self._skey(d0),
            0,
        )

    def _apply_reveal_di(self, data):
        owner, lta, d_i = data
        return (
            [],
            [],
            [("Reveal_di", (owner, lta, d_i))],
            [d_i],
            ("Reveal_di", d_i),
            None,
            0,
        )

    def _apply_reveal_ski(self, data):
        owner, lta, sk_i = data
        return (
            [],
            [],
            [("Reveal_ski", (owner, lta, sk_i))],
            [sk_i],
            ("Reveal_ski", sk_i),
            None,
            0,
        )

    def _apply_f_1(self, data):
        beacon_pub, finder = data
        t_f = self.provider.fresh_timestamp()
        loc = self.provider.fresh_payload("loc")
        report, floc_event = protocol.finder_make_report(
            protocol.Beacon(beacon_pub), loc, t_f, self.provider
        )
        observed = []
        if self.backend == "symbolic":
            observed.append(
                tuple_term(report.ciphertext, report.ephemeral_pub, report.report_id)
            )
        return (
            [("Fin_1", beacon_pub), ("Finder", finder)],
            [
                (
                    "F_upload",
                    finder,
                    self.server,
                    report.ciphertext,
                    report.ephemeral_pub,
                    report.report_id,
                )
            ],
            [floc_event],
            observed,
            None,
            None,
            1,
        )

    def _apply_s_1(self, data):
        finder, server, ct, pf, rid = data
        return (
            [("F_upload", finder, server, ct, pf, rid)],
            [("SStore", server, ct, pf, rid)],
            [("ServerRecv", (finder, server, pf, rid))],
            [],
            None,
            None,
            0,
        )

    def _apply_o_query(self, data):
        owner, lta, d0, sk0, server, ct, pf, rid, loc, t_f = data
        okd = ("Okd", owner, lta, d0, sk0)
        return (
            [("SStore", server, ct, pf, rid), okd],
            [okd],
            [("OwnerQuery", (owner, server, rid)), ("OwnerDecrypt", (owner, lta, loc, t_f))],
            [],
            None,
            None,
            0,
        )


@dataclass
class RunStats:
    traces: int = 0
    steps_total: int = 0
    nodes: int = 0
    aborted: bool = False


def explore(
    engine: TraceEngine,
    *,
    fusion: bool = True,
    on_step: Optional[Callable[[TraceEngine, Step], None]] = None,
    on_leaf: Optional[Callable[[TraceEngine], None]] = None,
    keep_going: Optional[Callable[[], bool]] = None,
) -> RunStats:
    """Depth-first enumeration of every maximal trace under the bounds.

    `on_step` fires after each rule application (every prefix is itself a
    trace), `on_leaf` at each maximal trace.  `keep_going` may cut the search
    short once a caller has all the answers it needs."""
    stats = RunStats()

    def want_more() -> bool:
        return keep_going() if keep_going is not None else True

    def push(inst: RuleInstance, applied: list[Step]) -> None:
        step = engine.apply(inst)
        applied.append(step)
        stats.nodes += 1
        if on_step is not None:
            on_step(engine, step)

    def visit() -> bool:
        if fusion:
            branches = engine.branching_instances()
        else:
            branches = engine.enabled_steps()
        if not branches:
            stats.traces += 1
            stats.steps_total += engine.trace_length()
            if on_leaf is not None:
                on_leaf(engine)
            return want_more()
        for inst in branches:
            applied: list[Step] = []
            push(inst, applied)
            if fusion:
                while True:
                    reactive = engine.reactive_instances()
                    if not reactive:
                        break
                    push(reactive[0], applied)
            alive = want_more() and visit()
            for _ in applied:
                engine.undo()
            if not alive:
                stats.aborted = True
                return False
        return True

    # Drain any reactions enabled in the initial state before branching.
    prelude: list[Step] = []
    if fusion:
        while True:
            reactive = engine.reactive_instances()
            if not reactive:
                break
            push(reactive[0], prelude)
    visit()
    for _ in prelude:
        engine.undo()
    return stats


def enumerate_traces(
    bounds: ScenarioBounds,
    *,
    backend: str = "symbolic",
    system: RewriteSystem = DEFAULT_SYSTEM,
    symmetry: bool = True,
    fusion: bool = True,
):
    """Lazily yield every maximal trace under the bounds as a list of Steps,
    in the same canonical depth-first order as `explore`."""
    engine = TraceEngine(bounds, backend=backend, system=system, symmetry=symmetry)

    def drain_reactive() -> int:
        applied = 0
        if fusion:
            while True:
                reactive = engine.reactive_instances()
                if not reactive:
                    break
                engine.apply(reactive[0])
                applied += 1
        return applied

    def branches() -> list[RuleInstance]:
        return engine.branching_instances() if fusion else engine.enabled_steps()

    prelude = drain_reactive()
    first = branches()
    if not first:
        yield list(engine.steps)
    else:
        # Frame: remaining instances at this node, plus how many steps the
        # currently explored child edge applied (to undo before the next).
        stack = [[list(reversed(first)), 0]]
        while stack:
            frame = stack[-1]
            for _ in range(frame[1]):
                engine.undo()
            frame[1] = 0
            if not frame[0]:
                stack.pop()
                continue
            inst = frame[0].pop()
            engine.apply(inst)
            frame[1] = 1 + drain_reactive()
            below = branches()
            if below:
                stack.append([list(reversed(below)), 0])
            else:
                yield list(engine.steps)
    for _ in range(prelude):
        engine.undo()
