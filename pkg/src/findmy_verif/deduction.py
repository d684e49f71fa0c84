"""Intruder knowledge and bounded message derivability.

The adversary owns the network: every message placed on it lands in the
knowledge base.  Derivability is decided by a two-phase procedure: first the
base is saturated under *analysis* (pair projection, plus symmetric and AEAD
decryption whenever the key itself is derivable), then the target is searched
for by goal-directed *synthesis* (pairing and application of the public
constructors), with synthesis recursion depth capped by the caller's bound.
Analysis only ever produces subterms of known messages, so saturation
terminates without a bound.

A positive answer carries a proof tree that can be replayed step by step;
`validate_proof` does exactly that.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .terms import (
    App,
    DEFAULT_SYSTEM,
    Pair,
    RewriteSystem,
    Term,
    normalize,
    render,
)

# Constructors the intruder may apply to derivable arguments.  Destructors
# (sdec, fst, snd, AEAD_dec, AEADauthdec) act through analysis instead.
PUBLIC_SYMBOLS = (
    "pk",
    "h",
    "senc",
    "AEADenc",
    "SK_fn",
    "di_fn",
    "SS_fn",
    "KeyGen",
    "NonceGen",
)


@dataclass(frozen=True)
class ProofNode:
    """One derivation step.  `rule` is "axiom", "pair", "fst", "snd",
    "sdec", "aead_dec", or "apply:<symbol>"."""

    term: Term
    rule: str
    children: tuple["ProofNode", ...] = ()

    def to_json(self):
        return {
            "term": render(self.term),
            "rule": self.rule,
            "children": [c.to_json() for c in self.children],
        }


def validate_proof(
    proof: ProofNode,
    kb: frozenset[Term],
    system: RewriteSystem = DEFAULT_SYSTEM,
) -> bool:
    """Replay every node of the tree against the rules it claims to use."""
    for child in proof.children:
        if not validate_proof(child, kb, system):
            return False
    t = proof.term
    kids = [c.term for c in proof.children]
    if proof.rule == "axiom":
        return t in kb and not kids
    if proof.rule == "pair":
        return len(kids) == 2 and normalize(Pair(kids[0], kids[1]), system) == t
    if proof.rule in ("fst", "snd"):
        return len(kids) == 1 and normalize(App(proof.rule, (kids[0],)), system) == t
    if proof.rule == "sdec":
        return len(kids) == 2 and normalize(App("sdec", (kids[0], kids[1])), system) == t
    if proof.rule == "aead_dec":
        return (
            len(kids) == 2
            and normalize(App("AEAD_dec", (kids[0], kids[1])), system) == t
        )
    if proof.rule.startswith("apply:"):
        fn = proof.rule.split(":", 1)[1]
        if fn not in PUBLIC_SYMBOLS:
            return False
        try:
            applied = App(fn, tuple(kids))
        except Exception:
            return False
        return normalize(applied, system) == t
    return False


@dataclass(frozen=True)
class KnowledgeBase:
    """Set of normalized terms the adversary holds.  Grows monotonically."""

    terms: frozenset[Term] = frozenset()
    system: RewriteSystem = DEFAULT_SYSTEM

    def observe(self, msg: Term) -> "KnowledgeBase":
        t = normalize(msg, self.system)
        if t in self.terms:
            return self
        return KnowledgeBase(self.terms | {t}, self.system)

    def observe_all(self, msgs) -> "KnowledgeBase":
        kb = self
        for m in msgs:
            kb = kb.observe(m)
        return kb

    def __contains__(self, t: Term) -> bool:
        return normalize(t, self.system) in self.terms

    def __len__(self) -> int:
        return len(self.terms)


def initial_knowledge(
    agent_names, system: RewriteSystem = DEFAULT_SYSTEM
) -> KnowledgeBase:
    """Starting point: agent names and nothing else.  Fresh values stay
    private until something leaks them."""
    return KnowledgeBase(frozenset(), system).observe_all(agent_names)


@dataclass(frozen=True)
class RevealEvent:
    kind: str  # LtkReveal_d0 | LtkReveal_SK0 | Reveal_di | Reveal_ski
    owner: Term
    lta: Term
    revealed: Term
    timestamp: int


class RevealNotEnabled(RuntimeError):
    """The key being revealed was never established by an earlier event."""


# Which earlier event kinds justify each reveal, and the parameter slot of
# the establishing event that must equal the revealed term.
_REVEAL_GATES = {
    "LtkReveal_d0": (("KeyEst",), 2),
    "LtkReveal_SK0": (("KeyEst",), 3),
    "Reveal_di": (("LPFS1", "LPFS2"), 4),
    "Reveal_ski": (("LPFS1", "LPFS2"), 5),
}


def reveal(kb: KnowledgeBase, event: RevealEvent, prior_events) -> KnowledgeBase:
    """Hand the revealed term to the adversary, provided its establishing
    event already happened.  `prior_events` is an iterable of (kind, params)
    pairs from the trace so far."""
    gate_kinds, slot = _REVEAL_GATES[event.kind]
    for kind, params in prior_events:
        if kind in gate_kinds and len(params) > slot and params[slot] == event.revealed:
            return kb.observe(event.revealed)
    raise RevealNotEnabled(f"{event.kind} of {render(event.revealed)}")


@dataclass
class _Search:
    pool: dict[Term, ProofNode]
    system: RewriteSystem
    memo: dict[tuple[Term, int], ProofNode | None] = field(default_factory=dict)

    def synth(self, target: Term, depth: int) -> ProofNode | None:
        hit = self.pool.get(target)
        if hit is not None:
            return hit
        if depth <= 0:
            return None
        key = (target, depth)
        if key in self.memo:
            return self.memo[key]
        self.memo[key] = None  # cut cycles while we work on this goal
        proof = self._synth_uncached(target, depth)
        self.memo[key] = proof
        return proof

    def _synth_uncached(self, target: Term, depth: int) -> ProofNode | None:
        if isinstance(target, Pair):
            left = self.synth(target.left, depth - 1)
            if left is not None:
                right = self.synth(target.right, depth - 1)
                if right is not None:
                    return ProofNode(target, "pair", (left, right))
            return None
        if isinstance(target, App) and target.fn in PUBLIC_SYMBOLS:
            candidates = [target.args]
            if target.fn == "SS_fn":
                a, p = target.args
                if isinstance(p, App) and p.fn == "pk":
                    # The canonical form hides one synthesis route: building
                    # the secret from the other side's key pair.
                    candidates.append((p.args[0], App("pk", (a,))))
            for args in candidates:
                proofs = []
                for arg in args:
                    proof = self.synth(arg, depth - 1)
                    if proof is None:
                        break
                    proofs.append(proof)
                else:
                    return ProofNode(target, f"apply:{target.fn}", tuple(proofs))
        return None


def _saturate(kb: frozenset[Term], depth: int, system: RewriteSystem) -> _Search:
    search = _Search(pool={t: ProofNode(t, "axiom") for t in kb}, system=system)
    changed = True
    while changed:
        changed = False
        search.memo.clear()  # pool grew, previous failures may now succeed
        for t in list(search.pool):
            if isinstance(t, Pair):
                parent = search.pool[t]
                for part, rule in ((t.left, "fst"), (t.right, "snd")):
                    if part not in search.pool:
                        search.pool[part] = ProofNode(part, rule, (parent,))
                        changed = True
            elif isinstance(t, App) and t.fn == "senc":
                m, k = t.args
                if m not in search.pool:
                    key_proof = search.synth(k, depth)
                    if key_proof is not None:
                        search.pool[m] = ProofNode(m, "sdec", (search.pool[t], key_proof))
                        changed = True
            elif isinstance(t, App) and t.fn == "AEADenc":
                k, pt, _aad = t.args
                if pt not in search.pool:
                    key_proof = search.synth(k, depth)
                    if key_proof is not None:
                        search.pool[pt] = ProofNode(
                            pt, "aead_dec", (key_proof, search.pool[t])
                        )
                        changed = True
    search.memo.clear()
    return search


def derive(
    kb: KnowledgeBase | frozenset[Term],
    target: Term,
    depth_bound: int,
    system: RewriteSystem = DEFAULT_SYSTEM,
) -> ProofNode | None:
    """Proof of `target` from `kb` within the synthesis depth bound, or None.

    The bound is part of the answer's meaning: a None at bound b says
    "not derivable with at most b nested synthesis steps", nothing stronger.
    """
    if isinstance(kb, KnowledgeBase):
        system = kb.system
        base = kb.terms
    else:
        base = frozenset(normalize(t, system) for t in kb)
    goal = normalize(target, system)
    search = _saturate(base, depth_bound, system)
    return search.synth(goal, depth_bound)


def can_derive(
    kb: KnowledgeBase | frozenset[Term],
    target: Term,
    depth_bound: int,
    system: RewriteSystem = DEFAULT_SYSTEM,
) -> bool:
    return derive(kb, target, depth_bound, system) is not None


_derivable_cache: dict[tuple[frozenset[Term], Term, int, bool], bool] = {}


def derivable_cached(
    base: frozenset[Term],
    target: Term,
    depth_bound: int,
    system: RewriteSystem = DEFAULT_SYSTEM,
) -> bool:
    """Memoized boolean form of `derive`, for the trace checker's hot path.
    `base` must already contain normalized terms."""
    key = (base, target, depth_bound, system.ecdh_canonicalization)
    hit = _derivable_cache.get(key)
    if hit is None:
        hit = derive(base, normalize(target, system), depth_bound, system) is not None
        _derivable_cache[key] = hit
    return hit
