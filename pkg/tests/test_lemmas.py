import pytest

from findmy_verif.checker import check_lemma, check_lemmas
from findmy_verif.engine import ScenarioBounds
from findmy_verif.formulas import (
    Before,
    EvalContext,
    EvAll,
    EvEx,
    KEx,
    NotF,
    TrueF,
    UnsupportedAtom,
    event_kinds,
    holds,
)
from findmy_verif.lemmas import all_lemmas, builtin_lemmas, control_lemmas, lemma_by_name
from findmy_verif.terms import Var, fresh, pub

SMALL = ScenarioBounds(max_sessions=1, max_epochs=2, max_reports=1, deduction_depth=4)


def test_twelve_builtins():
    lemmas = builtin_lemmas()
    assert len(lemmas) == 12
    assert [l.name for l in lemmas] == [
        "sanity_check",
        "epochs_start1",
        "epochs_start2",
        "epochs_end",
        "d0_sec",
        "SK0_sec",
        "di_sec",
        "ski_sec",
        "pfs_init_d",
        "pfs_d",
        "pfs_init_sk",
        "pfs_sk",
    ]


def test_timed_out_annotations():
    assert lemma_by_name("ski_sec").unbounded_status == "timed_out"
    assert lemma_by_name("pfs_sk").unbounded_status == "timed_out"
    verified = [l for l in builtin_lemmas() if l.unbounded_status == "verified"]
    assert len(verified) == 10


def test_di_sec_exception_needs_both_master_reveals():
    lemma = lemma_by_name("di_sec")
    kinds = event_kinds(lemma.formula)
    assert {"LtkReveal_d0", "LtkReveal_SK0"} <= kinds


def test_epochs_start2_orders_lpfs1_before_lpfs2():
    lemma = lemma_by_name("epochs_start2")
    assert isinstance(lemma.formula, EvAll)
    assert lemma.formula.kind == "LPFS2"
    inner = lemma.formula.body
    assert isinstance(inner, EvEx) and inner.kind == "LPFS1"
    assert inner.body == Before("j", "i")


# -- formula evaluator on hand-built traces --------------------------------

D0 = fresh("d0", 1)
SK0 = fresh("SK0", 2)


def _ctx(events, known=()):
    known_set = frozenset(known)
    return EvalContext(events=events, derivable=lambda t: t in known_set)


def test_evall_empty_trace_vacuous():
    f = EvAll("KeyEst", (Var("O"),), "i", KEx(Var("O")))
    assert holds(f, {}, _ctx([]))


def test_evex_finds_matching_event():
    events = [(1, "KeyEst", (pub("O"), pub("L"), D0, SK0))]
    f = EvEx("KeyEst", (Var("O"), Var("L"), Var("d0"), Var("SK0")), "i", TrueF())
    assert holds(f, {}, _ctx(events))
    g = EvEx("KeyEst", (pub("X"), Var("L"), Var("d0"), Var("SK0")), "i", TrueF())
    assert not holds(g, {}, _ctx(events))


def test_repeated_variable_forces_equality():
    events = [(1, "Pairish", (pub("A"), pub("B")))]
    same = EvEx("Pairish", (Var("x"), Var("x")), "i", TrueF())
    assert not holds(same, {}, _ctx(events))
    events_eq = [(1, "Pairish", (pub("A"), pub("A")))]
    assert holds(same, {}, _ctx(events_eq))


def test_before_atom():
    events = [(1, "A", ()), (5, "B", ())]
    f = EvAll("B", (), "j", EvEx("A", (), "i", Before("i", "j")))
    assert holds(f, {}, _ctx(events))
    g = EvAll("A", (), "i", EvEx("B", (), "j", Before("j", "i")))
    assert not holds(g, {}, _ctx(events))


def test_knowledge_atom_uses_derivability():
    events = [(1, "Leak", (D0,))]
    f = EvAll("Leak", (Var("x"),), "i", NotF(KEx(Var("x"))))
    assert holds(f, {}, _ctx(events, known=()))
    assert not holds(f, {}, _ctx(events, known=(D0,)))


def test_knowledge_atom_without_backend_raises():
    ctx = EvalContext(events=[(1, "Leak", (D0,))], derivable=None)
    f = EvEx("Leak", (Var("x"),), "i", KEx(Var("x")))
    with pytest.raises(UnsupportedAtom):
        holds(f, {}, ctx)


# -- verdicts at small bounds ----------------------------------------------


def test_builtins_hold_at_small_bounds():
    verdicts = check_lemmas(builtin_lemmas(), SMALL)
    for v in verdicts:
        assert v.status == "holds_at_bound", v.lemma


def test_controls_behave_at_small_bounds():
    for lemma in control_lemmas():
        verdict = check_lemma(lemma, SMALL)
        assert verdict.as_expected, lemma.name


def test_weakened_lemma_counterexample_contains_reveal():
    verdict = check_lemma(lemma_by_name("d0_sec_weakened"), SMALL)
    assert verdict.status == "falsified"
    trace = verdict.counterexample.trace
    assert any("LtkReveal_d0" in e for step in trace for e in step["event"])
    assert verdict.counterexample.knowledge_proofs


def test_grouping_requires_same_context():
    with pytest.raises(ValueError):
        from findmy_verif.checker import check_group

        check_group(
            [lemma_by_name("sanity_check"), lemma_by_name("pfs_d")], SMALL
        )


def test_concrete_backend_rejects_knowledge_lemmas():
    with pytest.raises(UnsupportedAtom):
        check_lemma(lemma_by_name("d0_sec"), SMALL, backend="concrete")


def test_epoch_lemmas_run_on_concrete_backend():
    import dataclasses

    for name in ("sanity_check", "epochs_start1", "epochs_start2", "epochs_end"):
        lemma = dataclasses.replace(lemma_by_name(name), reveals=frozenset())
        verdict = check_lemma(lemma, SMALL, backend="concrete")
        assert verdict.status == "holds_at_bound", name


def test_reveals_override_applies():
    lemma = lemma_by_name("d0_sec")
    verdict = check_lemmas([lemma], SMALL, reveals_override=frozenset())[0]
    assert verdict.reveals == frozenset()
    assert verdict.status == "holds_at_bound"


def test_checker_agrees_with_naive_enumeration():
    # reductions on vs off, every builtin lemma, small bounds
    fast = check_lemmas(builtin_lemmas(), SMALL)
    slow = check_lemmas(builtin_lemmas(), SMALL, fusion=False, symmetry=False)
    for a, b in zip(fast, slow):
        assert a.status == b.status, a.lemma


def test_formula_evaluator_matches_hand_rolled_checks():
    # straight-line reimplementations of two lemmas, no formula machinery
    from findmy_verif.engine import ScenarioBounds as SB
    from findmy_verif.engine import TraceEngine, explore

    def hand_epochs_start1(events):
        for i, kind, params in events:
            if kind != "LPFS1":
                continue
            lta, owner, d0, sk0 = params[0], params[1], params[2], params[3]
            if not any(
                j < i and k2 == "KeyEst" and p2 == (owner, lta, d0, sk0)
                for j, k2, p2 in events
            ):
                return False
        return True

    def hand_d0_sec(events, derivable, weakened=False):
        for _i, kind, params in events:
            if kind != "LPFS1":
                continue
            owner, lta, d0 = params[1], params[0], params[2]
            revealed = any(
                k2 == "LtkReveal_d0" and p2 == (owner, lta, d0)
                for _j, k2, p2 in events
            )
            if derivable(d0) and not (revealed and not weakened):
                return False
        return True

    from findmy_verif.formulas import EvalContext, holds

    bounds = SB(max_epochs=2, max_reports=1, reveals=frozenset({"d0", "SK0"}), deduction_depth=4)
    engine = TraceEngine(bounds)
    es1 = lemma_by_name("epochs_start1").formula
    d0sec = lemma_by_name("d0_sec").formula
    weak = lemma_by_name("d0_sec_weakened").formula
    weakened_violation_seen = [False]

    def check(eng, _step):
        events = list(eng.events_flat)
        ctx = EvalContext(events=events, derivable=eng.derivable)
        assert holds(es1, {}, ctx) == hand_epochs_start1(events)
        assert holds(d0sec, {}, ctx) == hand_d0_sec(events, eng.derivable)
        weak_ok = holds(weak, {}, ctx)
        assert weak_ok == hand_d0_sec(events, eng.derivable, weakened=True)
        if not weak_ok:
            weakened_violation_seen[0] = True

    explore(engine, on_step=check)
    assert weakened_violation_seen[0], "hand evaluator never saw the attack"


def test_parallel_jobs_match_serial():
    serial = check_lemmas(all_lemmas(), SMALL, jobs=1)
    parallel = check_lemmas(all_lemmas(), SMALL, jobs=2)
    assert [(v.lemma, v.status) for v in serial] == [
        (v.lemma, v.status) for v in parallel
    ]
