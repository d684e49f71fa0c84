"""The built-in trace properties and their checking contexts.

Each lemma carries the reveal rules that belong to its threat model.  The
master-key reveals are part of every secrecy statement (they appear in the
exception clauses), while the per-epoch reveal rules only exist for the
forward-secrecy statements about the private scalars.  The forward-secrecy
statements about the symmetric keys instead take "the adversary knows SK_i"
as a premise: the update chain is a public function, so handing SK_i to the
adversary by rule would make every later SK_j follow by construction and the
property would say nothing.

Lemmas whose `unbounded_status` is "timed_out" have no known unbounded
verification; the bounded verdict reported here is strictly weaker and is
labeled as such in reports.
"""

from __future__ import annotations

from dataclasses import dataclass

from .formulas import (
    AndF,
    Before,
    EqT,
    EvAll,
    EvEx,
    Formula,
    KEx,
    NotF,
    ImpliesF,
    OrF,
    TrueF,
)
from .terms import App, Var


@dataclass(frozen=True)
class Lemma:
    name: str
    kind: str  # "all_traces" | "exists_trace"
    formula: Formula
    reveals: frozenset[str] = frozenset()
    ecdh_rule: bool = True  # rewrite system used for this lemma's model
    expect: str = "holds"  # "holds" | "fails" (controls expect failure)
    unbounded_status: str = "verified"  # "verified" | "timed_out" | "control"
    description: str = ""


def _v(name: str) -> Var:
    return Var(name)


L, O, D0, SK0 = _v("L"), _v("O"), _v("d0"), _v("SK0")
D1, SK1 = _v("d1"), _v("SK1")
DI, SKI = _v("d_i"), _v("SK_i")
DJ, SKJ = _v("d_j"), _v("SK_j")

_LPFS1 = (L, O, D0, SK0, D1, SK1)
_LPFS2_I = (L, O, D0, SK0, DI, SKI)
_LPFS2_J = (L, O, D0, SK0, DJ, SKJ)

_REVEAL_D0 = EvEx("LtkReveal_d0", (O, L, D0), "r1", TrueF())
_REVEAL_SK0 = EvEx("LtkReveal_SK0", (O, L, SK0), "r2", TrueF())
_BOTH_MASTER_REVEALS = AndF((_REVEAL_D0, _REVEAL_SK0))


def _no_k(pattern) -> Formula:
    return NotF(KEx(pattern))


def builtin_lemmas() -> list[Lemma]:
    lemmas = [
        Lemma(
            name="sanity_check",
            kind="exists_trace",
            formula=EvEx("Ok_s", (L, O, D0, SK0), "i", TrueF()),
            reveals=frozenset(),
            description="the protocol has at least one complete honest run",
        ),
        Lemma(
            name="epochs_start1",
            kind="all_traces",
            formula=EvAll(
                "LPFS1",
                _LPFS1,
                "i",
                EvEx("KeyEst", (O, L, D0, SK0), "j", Before("j", "i")),
            ),
            reveals=frozenset({"d0", "SK0"}),
            description="a first-epoch broadcast is preceded by the pairing "
            "that established its keys",
        ),
        Lemma(
            name="epochs_start2",
            kind="all_traces",
            formula=EvAll(
                "LPFS2",
                _LPFS2_I,
                "i",
                EvEx("LPFS1", _LPFS1, "j", Before("j", "i")),
            ),
            reveals=frozenset({"d0", "SK0"}),
            description="a later-epoch broadcast is preceded by a first-epoch "
            "broadcast between the same parties",
        ),
        Lemma(
            name="epochs_end",
            kind="all_traces",
            formula=EvAll(
                "Floc",
                (_v("loc"), _v("d_f"), _v("p")),
                "i",
                OrF(
                    (
                        EvEx(
                            "LPFS1",
                            _LPFS1,
                            "j",
                            AndF(
                                (
                                    Before("j", "i"),
                                    EqT(_v("p"), App("pk", (D1,))),
                                )
                            ),
                        ),
                        EvEx(
                            "LPFS2",
                            _LPFS2_I,
                            "j",
                            AndF(
                                (
                                    Before("j", "i"),
                                    EqT(_v("p"), App("pk", (DI,))),
                                )
                            ),
                        ),
                    )
                ),
            ),
            reveals=frozenset({"d0", "SK0"}),
            description="a finder only reports beacons some lost device "
            "actually broadcast",
        ),
        Lemma(
            name="d0_sec",
            kind="all_traces",
            formula=EvAll(
                "LPFS1",
                _LPFS1,
                "i",
                OrF((_no_k(D0), _REVEAL_D0)),
            ),
            reveals=frozenset({"d0", "SK0"}),
            description="the private master scalar stays between owner and "
            "device unless explicitly revealed",
        ),
        Lemma(
            name="SK0_sec",
            kind="all_traces",
            formula=EvAll(
                "LPFS1",
                _LPFS1,
                "i",
                OrF((_no_k(SK0), _REVEAL_SK0)),
            ),
            reveals=frozenset({"d0", "SK0"}),
            description="the master symmetric key stays between owner and "
            "device unless explicitly revealed",
        ),
        Lemma(
            name="di_sec",
            kind="all_traces",
            formula=EvAll(
                "LPFS2",
                _LPFS2_I,
                "i",
                EvAll(
                    "LPFS1",
                    _LPFS1,
                    "j",
                    ImpliesF(
                        Before("j", "i"),
                        OrF((_no_k(DI), _BOTH_MASTER_REVEALS)),
                    ),
                ),
            ),
            reveals=frozenset({"d0", "SK0"}),
            description="an epoch private scalar needs both master secrets "
            "to reconstruct",
        ),
        Lemma(
            name="ski_sec",
            kind="all_traces",
            formula=EvAll(
                "LPFS2",
                _LPFS2_I,
                "i",
                EvAll(
                    "LPFS1",
                    _LPFS1,
                    "j",
                    ImpliesF(
                        Before("j", "i"),
                        OrF((_no_k(SKI), _REVEAL_SK0)),
                    ),
                ),
            ),
            reveals=frozenset({"d0", "SK0"}),
            unbounded_status="timed_out",
            description="an epoch symmetric key needs the master symmetric "
            "key to reconstruct",
        ),
        # The per-epoch reveal rule can hit any broadcast scalar, including
        # the one the conclusion talks about; a world where the later scalar
        # was itself extracted says nothing about forward secrecy, so that
        # case joins the exception clause.  What remains checked: a leaked
        # scalar plus everything public never *derives* a later one.
        Lemma(
            name="pfs_init_d",
            kind="all_traces",
            formula=EvAll(
                "LPFS1",
                _LPFS1,
                "i1",
                EvAll(
                    "Reveal_di",
                    (O, L, D1),
                    "r",
                    EvAll(
                        "LPFS2",
                        _LPFS2_I,
                        "i2",
                        ImpliesF(
                            Before("i1", "i2"),
                            OrF(
                                (
                                    _no_k(DI),
                                    _BOTH_MASTER_REVEALS,
                                    EvEx("Reveal_di", (O, L, DI), "rx", TrueF()),
                                )
                            ),
                        ),
                    ),
                ),
            ),
            reveals=frozenset({"d0", "SK0", "di"}),
            description="leaking the first epoch's private scalar exposes no "
            "future one",
        ),
        Lemma(
            name="pfs_d",
            kind="all_traces",
            formula=EvAll(
                "LPFS1",
                _LPFS1,
                "i1",
                EvAll(
                    "LPFS2",
                    _LPFS2_I,
                    "i2",
                    EvAll(
                        "Reveal_di",
                        (O, L, DI),
                        "r",
                        EvAll(
                            "LPFS2",
                            _LPFS2_J,
                            "i3",
                            ImpliesF(
                                AndF((Before("i1", "i2"), Before("i2", "i3"))),
                                OrF(
                                    (
                                        _no_k(DJ),
                                        _BOTH_MASTER_REVEALS,
                                        EvEx("Reveal_di", (O, L, DJ), "rx", TrueF()),
                                    )
                                ),
                            ),
                        ),
                    ),
                ),
            ),
            reveals=frozenset({"d0", "SK0", "di"}),
            description="leaking any epoch's private scalar exposes no later "
            "one",
        ),
        Lemma(
            name="pfs_init_sk",
            kind="all_traces",
            formula=EvAll(
                "LPFS1",
                _LPFS1,
                "i1",
                EvAll(
                    "LPFS2",
                    _LPFS2_I,
                    "i2",
                    ImpliesF(
                        AndF((Before("i1", "i2"), KEx(SK1))),
                        OrF((_no_k(SKI), _REVEAL_SK0)),
                    ),
                ),
            ),
            reveals=frozenset({"d0", "SK0"}),
            description="an adversary knowing the first epoch's symmetric key "
            "must have had the master symmetric key",
        ),
        Lemma(
            name="pfs_sk",
            kind="all_traces",
            formula=EvAll(
                "LPFS1",
                _LPFS1,
                "i1",
                EvAll(
                    "LPFS2",
                    _LPFS2_I,
                    "i2",
                    EvAll(
                        "LPFS2",
                        _LPFS2_J,
                        "i3",
                        ImpliesF(
                            AndF(
                                (
                                    Before("i1", "i2"),
                                    Before("i2", "i3"),
                                    KEx(SKI),
                                )
                            ),
                            OrF((_no_k(SKJ), _REVEAL_SK0)),
                        ),
                    ),
                ),
            ),
            reveals=frozenset({"d0", "SK0"}),
            unbounded_status="timed_out",
            description="an adversary knowing any epoch's symmetric key must "
            "have had the master symmetric key",
        ),
    ]
    return lemmas


def control_lemmas() -> list[Lemma]:
    """Attack-finding regressions.  These must FAIL: a checker that cannot
    produce the expected counterexamples is not trustworthy when it reports
    the real lemmas as holding."""
    owner_decrypt_reachable = EvEx(
        "OwnerDecrypt", (O, L, _v("loc"), _v("tF")), "i", TrueF()
    )
    return [
        Lemma(
            name="d0_sec_weakened",
            kind="all_traces",
            formula=EvAll("LPFS1", _LPFS1, "i", _no_k(D0)),
            reveals=frozenset({"d0"}),
            expect="fails",
            unbounded_status="control",
            description="d0 secrecy with the reveal exception deleted; the "
            "checker must find the reveal trace",
        ),
        Lemma(
            name="owner_decrypt_reachable",
            kind="exists_trace",
            formula=owner_decrypt_reachable,
            reveals=frozenset(),
            expect="holds",
            unbounded_status="control",
            description="the owner can retrieve and decrypt a report in some "
            "honest run",
        ),
        Lemma(
            name="owner_decrypt_no_ecdh_rule",
            kind="exists_trace",
            formula=owner_decrypt_reachable,
            reveals=frozenset(),
            ecdh_rule=False,
            expect="fails",
            unbounded_status="control",
            description="without the shared-secret canonicalization the two "
            "sides disagree on the key and no report ever decrypts",
        ),
    ]


def all_lemmas() -> list[Lemma]:
    return builtin_lemmas() + control_lemmas()


def lemma_by_name(name: str) -> Lemma:
    for lemma in all_lemmas():
        if lemma.name == name:
            return lemma
    raise KeyError(name)
