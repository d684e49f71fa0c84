"""Symbolic message terms and their equational theory.

Terms are immutable trees: public names, session-fresh names, pairs, and
applications of a fixed signature of protocol function symbols.  A small
convergent rewrite system decides equality modulo the theory: decryption
cancels encryption, projections open pairs, and the two arguments of a
shared-secret application are put into a canonical order so that the
Diffie-Hellman identity ss(a, pk(b)) = ss(b, pk(a)) collapses to syntactic
equality of normal forms.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator

# Function symbols and their arities.  The KDF constants ("update",
# "diversify", output lengths) are absorbed into SK_fn / di_fn, so they never
# appear as terms.
ARITIES = {
    "pk": 1,
    "h": 1,
    "senc": 2,
    "sdec": 2,
    "fst": 1,
    "snd": 1,
    "SK_fn": 1,
    "di_fn": 2,
    "SS_fn": 2,
    "KeyGen": 2,
    "NonceGen": 2,
    "AEADenc": 3,
    "AEADauthdec": 3,
    "AEAD_dec": 2,
}


class TermError(ValueError):
    """Structurally malformed term (wrong arity or unknown symbol)."""


class ParseError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class Term:
    """Base class; concrete terms are the four frozen subclasses below."""

    __slots__ = ()


@dataclass(frozen=True, slots=True)
class PublicName(Term):
    name: str


@dataclass(frozen=True, slots=True)
class FreshName(Term):
    label: str
    uid: int


@dataclass(frozen=True, slots=True)
class Pair(Term):
    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class App(Term):
    fn: str
    args: tuple[Term, ...]

    def __post_init__(self):
        arity = ARITIES.get(self.fn)
        if arity is None:
            raise TermError(f"unknown function symbol {self.fn!r}")
        if len(self.args) != arity:
            raise TermError(
                f"{self.fn} expects {arity} argument(s), got {len(self.args)}"
            )


@dataclass(frozen=True, slots=True)
class Var(Term):
    """Formula-level placeholder.  Never occurs in protocol messages; it only
    appears inside lemma patterns, where it is bound by quantifiers."""

    name: str


def pub(name: str) -> PublicName:
    return PublicName(name)


def fresh(label: str, uid: int) -> FreshName:
    return FreshName(label, uid)


def pair(left: Term, right: Term) -> Pair:
    return Pair(left, right)


def tuple_term(*items: Term) -> Term:
    """Right-nested pair encoding of an n-tuple."""
    if not items:
        raise TermError("empty tuple")
    out = items[-1]
    for item in reversed(items[:-1]):
        out = Pair(item, out)
    return out


def pk(t: Term) -> App:
    return App("pk", (t,))


def h(t: Term) -> App:
    return App("h", (t,))


def senc(m: Term, k: Term) -> App:
    return App("senc", (m, k))


def sdec(c: Term, k: Term) -> App:
    return App("sdec", (c, k))


def fst(t: Term) -> App:
    return App("fst", (t,))


def snd(t: Term) -> App:
    return App("snd", (t,))


def sk_fn(sk: Term) -> App:
    return App("SK_fn", (sk,))


def di_fn(d0: Term, sk: Term) -> App:
    return App("di_fn", (d0, sk))


def ss_fn(secret: Term, peer: Term) -> App:
    return App("SS_fn", (secret, peer))


def key_gen(ss: Term, p: Term) -> App:
    return App("KeyGen", (ss, p))


def nonce_gen(ss: Term, p: Term) -> App:
    return App("NonceGen", (ss, p))


def aead_enc(k: Term, pt: Term, aad: Term) -> App:
    return App("AEADenc", (k, pt, aad))


def aead_authdec(k: Term, c: Term, aad: Term) -> App:
    return App("AEADauthdec", (k, c, aad))


def aead_dec(k: Term, c: Term) -> App:
    return App("AEAD_dec", (k, c))


@dataclass(frozen=True)
class RewriteSystem:
    """The oriented equations.  `ecdh_canonicalization` switches the
    argument-ordering rule for SS_fn on or off; disabling it makes the two
    sides of a Diffie-Hellman exchange compute syntactically different shared
    secrets, which is useful as a sanity control."""

    ecdh_canonicalization: bool = True


DEFAULT_SYSTEM = RewriteSystem()
NO_ECDH_SYSTEM = RewriteSystem(ecdh_canonicalization=False)


def term_key(t: Term):
    """Total order on terms: constructor tag, then label, then recursion."""
    if isinstance(t, PublicName):
        return (0, t.name)
    if isinstance(t, FreshName):
        return (1, t.label, t.uid)
    if isinstance(t, App):
        return (2, t.fn, tuple(term_key(a) for a in t.args))
    if isinstance(t, Pair):
        return (3, term_key(t.left), term_key(t.right))
    if isinstance(t, Var):
        return (4, t.name)
    raise TermError(f"not a term: {t!r}")


_norm_cache: dict[tuple[Term, bool], Term] = {}


def normalize(t: Term, system: RewriteSystem = DEFAULT_SYSTEM) -> Term:
    """Unique normal form of `t` under the rewrite system.  Idempotent."""
    key = (t, system.ecdh_canonicalization)
    cached = _norm_cache.get(key)
    if cached is not None:
        return cached
    if isinstance(t, (PublicName, FreshName, Var)):
        result = t
    elif isinstance(t, Pair):
        result = Pair(normalize(t.left, system), normalize(t.right, system))
    elif isinstance(t, App):
        args = tuple(normalize(a, system) for a in t.args)
        result = _reduce_root(App(t.fn, args), system)
    else:
        raise TermError(f"not a term: {t!r}")
    _norm_cache[key] = result
    return result


def _reduce_root(t: App, system: RewriteSystem) -> Term:
    # Arguments are already in normal form, so each contraction here yields a
    # normal form directly (every right-hand side is a subterm of an argument,
    # except the SS_fn swap which cannot re-fire).
    fn, args = t.fn, t.args
    if fn == "sdec":
        c, k = args
        if isinstance(c, App) and c.fn == "senc" and c.args[1] == k:
            return c.args[0]
    elif fn == "fst":
        if isinstance(args[0], Pair):
            return args[0].left
    elif fn == "snd":
        if isinstance(args[0], Pair):
            return args[0].right
    elif fn == "AEADauthdec":
        k, c, aad = args
        if (
            isinstance(c, App)
            and c.fn == "AEADenc"
            and c.args[0] == k
            and c.args[2] == aad
        ):
            return c.args[1]
    elif fn == "AEAD_dec":
        k, c = args
        if isinstance(c, App) and c.fn == "AEADenc" and c.args[0] == k:
            return c.args[1]
    elif fn == "SS_fn" and system.ecdh_canonicalization:
        a, p = args
        if isinstance(p, App) and p.fn == "pk":
            b = p.args[0]
            if term_key(b) < term_key(a):
                return App("SS_fn", (b, App("pk", (a,))))
    return t


def equal_mod_e(t1: Term, t2: Term, system: RewriteSystem = DEFAULT_SYSTEM) -> bool:
    return normalize(t1, system) == normalize(t2, system)


def subterm_set(t: Term, system: RewriteSystem = DEFAULT_SYSTEM) -> frozenset[Term]:
    """All subterms of the normal form of `t`, including itself."""
    out: set[Term] = set()
    _collect(normalize(t, system), out)
    return frozenset(out)


def _collect(t: Term, out: set[Term]) -> None:
    if t in out:
        return
    out.add(t)
    if isinstance(t, Pair):
        _collect(t.left, out)
        _collect(t.right, out)
    elif isinstance(t, App):
        for a in t.args:
            _collect(a, out)


def iter_subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, Pair):
        yield from iter_subterms(t.left)
        yield from iter_subterms(t.right)
    elif isinstance(t, App):
        for a in t.args:
            yield from iter_subterms(a)


def term_size(t: Term) -> int:
    if isinstance(t, Pair):
        return 1 + term_size(t.left) + term_size(t.right)
    if isinstance(t, App):
        return 1 + sum(term_size(a) for a in t.args)
    return 1


def render(t: Term) -> str:
    if isinstance(t, PublicName):
        return t.name
    if isinstance(t, FreshName):
        return f"~{t.label}_{t.uid}"
    if isinstance(t, Var):
        return f"?{t.name}"
    if isinstance(t, Pair):
        return f"<{render(t.left)},{render(t.right)}>"
    if isinstance(t, App):
        return f"{t.fn}({','.join(render(a) for a in t.args)})"
    raise TermError(f"not a term: {t!r}")


_IDENT = re.compile(r"[A-Za-z0-9_]+")
_FRESH_SPLIT = re.compile(r"^(.*?)_(\d+)$")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str) -> ParseError:
        return ParseError(message, self.pos)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str) -> None:
        self.skip_ws()
        if self.peek() != ch:
            raise self.error(f"expected {ch!r}")
        self.pos += 1

    def ident(self) -> str:
        self.skip_ws()
        m = _IDENT.match(self.text, self.pos)
        if not m:
            raise self.error("expected identifier")
        self.pos = m.end()
        return m.group(0)

    def term(self) -> Term:
        self.skip_ws()
        ch = self.peek()
        if ch == "~":
            self.pos += 1
            name = self.ident()
            m = _FRESH_SPLIT.match(name)
            if m:
                return FreshName(m.group(1), int(m.group(2)))
            return FreshName(name, 0)
        if ch == "<":
            self.pos += 1
            items = [self.term()]
            self.skip_ws()
            while self.peek() == ",":
                self.pos += 1
                items.append(self.term())
                self.skip_ws()
            self.expect(">")
            if len(items) < 2:
                raise self.error("pair needs at least two components")
            return tuple_term(*items)
        name = self.ident()
        self.skip_ws()
        if self.peek() == "(":
            if name not in ARITIES:
                raise self.error(f"unknown function symbol {name!r}")
            self.pos += 1
            args = [self.term()]
            self.skip_ws()
            while self.peek() == ",":
                self.pos += 1
                args.append(self.term())
                self.skip_ws()
            self.expect(")")
            try:
                return App(name, tuple(args))
            except TermError as exc:
                raise self.error(str(exc)) from exc
        return PublicName(name)


def parse(text: str) -> Term:
    p = _Parser(text)
    t = p.term()
    p.skip_ws()
    if p.pos != len(text):
        raise p.error("trailing input")
    return t
