"""Lemma checking over exhaustively enumerated traces.

A universally quantified lemma is falsified by the first reachable trace that
violates it (every prefix the search visits is a trace); an existential one
is satisfied by the first trace meeting it.  Verdicts at the end of an
exhausted search are explicitly *bounded*: "holds-at-bound" says no violation
exists within the scenario bounds, nothing more.

Monitors re-evaluate their formula only when a step could change its value:
when it emits an event kind the formula mentions, or, for formulas with
knowledge atoms, when the step put something new on the network.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

from . import formulas
from .deduction import derive
from .engine import (
    DEFAULT_BOUNDS,
    RunStats,
    ScenarioBounds,
    Step,
    TraceEngine,
    explore,
    param_render,
    render_event,
    render_fact,
)
from .formulas import EvalContext, UnsupportedAtom
from .lemmas import Lemma
from .terms import DEFAULT_SYSTEM, NO_ECDH_SYSTEM, App, render


@dataclass
class Counterexample:
    trace: list[dict]
    witness: dict[str, str]
    knowledge_proofs: dict[str, dict]

    def to_json(self) -> dict:
        return {
            "trace": self.trace,
            "witness": self.witness,
            "knowledge_proofs": self.knowledge_proofs,
        }


@dataclass
class Verdict:
    lemma: str
    status: str  # "holds_at_bound" | "falsified"
    expect: str
    unbounded_status: str
    bounds: ScenarioBounds
    reveals: frozenset[str]
    ecdh_rule: bool
    traces: int = 0
    nodes: int = 0
    elapsed_ms: float = 0.0
    counterexample: Optional[Counterexample] = None

    @property
    def as_expected(self) -> bool:
        if self.expect == "holds":
            return self.status == "holds_at_bound"
        return self.status == "falsified"

    def note(self) -> str:
        if self.unbounded_status == "timed_out":
            return (
                "bounded verdict only: no unbounded proof of this property is "
                "known, so holds-at-bound is strictly weaker than a proof"
            )
        if self.unbounded_status == "control":
            return "attack-finding control"
        return "matches the unbounded verdict for this property"


def render_trace(engine: TraceEngine) -> list[dict]:
    out = []
    for step in engine.steps:
        out.append(
            {
                "step": step.index,
                "rule": step.rule,
                "event": [render_event(e) for e in step.events],
                "params": [param_render(p) for p in (step.events[0][1] if step.events else ())],
                "consumed": [render_fact(f) for f in step.consumed],
                "produced": [render_fact(f) for f in step.produced],
            }
        )
    return out


class _Monitor:
    def __init__(self, lemma: Lemma, engine: TraceEngine):
        self.lemma = lemma
        self.engine = engine
        self.kinds = formulas.event_kinds(lemma.formula)
        self.watches_kb = formulas.mentions_knowledge(lemma.formula)
        self.resolved = False
        self.outcome: Optional[str] = None
        self.counterexample: Optional[Counterexample] = None

    def _context(self) -> EvalContext:
        engine = self.engine
        derivable = engine.derivable if engine.backend == "symbolic" else None
        return EvalContext(
            events=engine.events_flat,
            derivable=derivable,
            apply_fn=self._apply_fn,
        )

    def _apply_fn(self, fn: str, args: tuple):
        if self.engine.backend == "symbolic":
            from .terms import normalize

            return normalize(App(fn, args), self.engine.system)
        if fn == "pk":
            return self.engine.provider.pub_of(args[0])
        if fn == "h":
            return self.engine.provider.digest(args[0])
        raise UnsupportedAtom(f"no concrete interpretation for {fn}")

    def relevant(self, step: Step) -> bool:
        if any(kind in self.kinds for kind, _ in step.events):
            return True
        return self.watches_kb and bool(step.observed)

    def on_step(self, engine: TraceEngine, step: Step) -> None:
        if self.resolved or not self.relevant(step):
            return
        ctx = self._context()
        satisfied = formulas.holds(self.lemma.formula, {}, ctx)
        if self.lemma.kind == "exists_trace":
            if satisfied:
                self.resolved = True
                self.outcome = "holds_at_bound"
            return
        if not satisfied:
            self.resolved = True
            self.outcome = "falsified"
            self.counterexample = self._snapshot(ctx)

    def finish(self) -> str:
        if self.outcome is not None:
            return self.outcome
        # Search exhausted without resolution.
        if self.lemma.kind == "exists_trace":
            return "falsified"
        return "holds_at_bound"

    def _snapshot(self, ctx: EvalContext) -> Counterexample:
        env = formulas.failing_env(self.lemma.formula, {}, ctx)
        proofs: dict[str, dict] = {}
        if self.engine.backend == "symbolic":
            for target in formulas.k_targets(self.lemma.formula, env, ctx):
                proof = derive(
                    self.engine.kb_now,
                    target,
                    self.engine.bounds.deduction_depth,
                    self.engine.system,
                )
                if proof is not None:
                    proofs[render(target)] = proof.to_json()
        return Counterexample(
            trace=render_trace(self.engine),
            witness=formulas.render_env(env),
            knowledge_proofs=proofs,
        )


@dataclass
class GroupResult:
    stats: RunStats
    verdicts: list[Verdict]


def check_group(
    lemmas: list[Lemma],
    bounds: ScenarioBounds,
    *,
    backend: str = "symbolic",
    fusion: bool = True,
    symmetry: bool = True,
    seed: int = 0,
) -> GroupResult:
    """Check lemmas that share one model context with a single enumeration.
    All must agree on reveal rules and rewrite system."""
    reveal_sets = {lemma.reveals for lemma in lemmas}
    ecdh_rules = {lemma.ecdh_rule for lemma in lemmas}
    if len(reveal_sets) != 1 or len(ecdh_rules) != 1:
        raise ValueError("grouped lemmas must share reveal set and rewrite system")
    reveals = reveal_sets.pop()
    ecdh_rule = ecdh_rules.pop()
    system = DEFAULT_SYSTEM if ecdh_rule else NO_ECDH_SYSTEM
    if backend == "concrete":
        for lemma in lemmas:
            if formulas.mentions_knowledge(lemma.formula):
                raise UnsupportedAtom(
                    f"lemma {lemma.name} uses adversary knowledge; "
                    "it needs the symbolic backend"
                )

    run_bounds = ScenarioBounds(
        max_sessions=bounds.max_sessions,
        max_epochs=bounds.max_epochs,
        max_reports=bounds.max_reports,
        reveals=reveals,
        deduction_depth=bounds.deduction_depth,
        injection_bound=bounds.injection_bound,
    )
    provider = None
    if backend == "concrete":
        from .concrete import ConcreteProvider

        provider = ConcreteProvider(seed=seed)
    engine = TraceEngine(
        run_bounds, backend=backend, system=system, provider=provider, symmetry=symmetry
    )
    monitors = [_Monitor(lemma, engine) for lemma in lemmas]

    started = time.perf_counter()
    stats = explore(
        engine,
        fusion=fusion,
        on_step=lambda eng, step: [m.on_step(eng, step) for m in monitors],
        keep_going=lambda: not all(m.resolved for m in monitors),
    )
    elapsed_ms = (time.perf_counter() - started) * 1000.0

    verdicts = []
    for monitor in monitors:
        verdicts.append(
            Verdict(
                lemma=monitor.lemma.name,
                status=monitor.finish(),
                expect=monitor.lemma.expect,
                unbounded_status=monitor.lemma.unbounded_status,
                bounds=run_bounds,
                reveals=reveals,
                ecdh_rule=ecdh_rule,
                traces=stats.traces,
                nodes=stats.nodes,
                elapsed_ms=elapsed_ms,
                counterexample=monitor.counterexample,
            )
        )
    return GroupResult(stats=stats, verdicts=verdicts)


def check_lemma(
    lemma: Lemma,
    bounds: ScenarioBounds = DEFAULT_BOUNDS,
    **kwargs,
) -> Verdict:
    return check_group([lemma], bounds, **kwargs).verdicts[0]


def check_lemmas(
    lemmas: list[Lemma],
    bounds: ScenarioBounds = DEFAULT_BOUNDS,
    *,
    backend: str = "symbolic",
    fusion: bool = True,
    symmetry: bool = True,
    seed: int = 0,
    jobs: int = 1,
    reveals_override: Optional[frozenset[str]] = None,
) -> list[Verdict]:
    """Check a mixed batch, grouping lemmas that share a model context so the
    enumeration is reused.  Verdict order follows the input order."""
    effective = []
    for lemma in lemmas:
        if reveals_override is not None:
            from dataclasses import replace

            lemma = replace(lemma, reveals=frozenset(reveals_override))
        effective.append(lemma)

    groups: dict[tuple, list[Lemma]] = {}
    for lemma in effective:
        groups.setdefault((lemma.reveals, lemma.ecdh_rule), []).append(lemma)

    group_items = sorted(groups.items(), key=lambda kv: (sorted(kv[0][0]), kv[0][1]))
    run = lambda item: check_group(
        item[1], bounds, backend=backend, fusion=fusion, symmetry=symmetry, seed=seed
    )
    if jobs > 1 and len(group_items) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(
                    _check_group_spawn,
                    [
                        (item[1], bounds, backend, fusion, symmetry, seed)
                        for item in group_items
                    ],
                )
            )
    else:
        results = [run(item) for item in group_items]

    by_name: dict[str, Verdict] = {}
    for result in results:
        for verdict in result.verdicts:
            by_name[verdict.lemma] = verdict
    return [by_name[lemma.name] for lemma in effective]


def _check_group_spawn(packed) -> GroupResult:
    lemmas, bounds, backend, fusion, symmetry, seed = packed
    return check_group(
        lemmas, bounds, backend=backend, fusion=fusion, symmetry=symmetry, seed=seed
    )
