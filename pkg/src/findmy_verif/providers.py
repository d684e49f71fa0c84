"""Crypto provider interface shared by the symbolic and concrete backends.

The protocol role logic is written once against this interface.  The symbolic
provider computes over message terms, so a "ciphertext" is an AEADenc
application and opening it is a rewrite; the concrete provider (see
`concrete.py`) computes over bytes on NIST P-224 with real AES-GCM.
"""

from __future__ import annotations

import abc
from typing import Any, Optional

from . import terms
from .terms import DEFAULT_SYSTEM, App, FreshName, Pair, RewriteSystem, Term, normalize


class CryptoProvider(abc.ABC):
    """Operations the four protocol roles need.

    Invariants every implementation must satisfy:
      * ecdh(a, pub_of(b)) == ecdh(b, pub_of(a))
      * aead_open inverts aead_seal under matching key and IV
      * sk_next and d_next are deterministic
    """

    def checkpoint(self) -> Any:
        """Token capturing the provider's freshness state; `restore` rewinds
        to it.  Lets a backtracking search reuse one provider."""
        return None

    def restore(self, token: Any) -> None:
        return None

    @abc.abstractmethod
    def fresh_secret(self, label: str) -> Any: ...

    @abc.abstractmethod
    def fresh_symkey(self, label: str) -> Any: ...

    @abc.abstractmethod
    def fresh_payload(self, label: str) -> Any: ...

    @abc.abstractmethod
    def fresh_timestamp(self) -> Any: ...

    @abc.abstractmethod
    def pub_of(self, secret: Any) -> Any: ...

    @abc.abstractmethod
    def sk_next(self, sk_prev: Any) -> Any: ...

    @abc.abstractmethod
    def d_next(self, d0: Any, sk_i: Any) -> Any: ...

    @abc.abstractmethod
    def ecdh(self, secret: Any, peer: Any) -> Any: ...

    @abc.abstractmethod
    def key_of(self, shared: Any, beacon_pub: Any) -> Any: ...

    @abc.abstractmethod
    def iv_of(self, shared: Any, beacon_pub: Any) -> Any: ...

    @abc.abstractmethod
    def aead_seal(self, key: Any, plain: Any, iv: Any) -> Any: ...

    @abc.abstractmethod
    def aead_open(self, key: Any, cipher: Any, iv: Any) -> Optional[Any]:
        """None on authentication failure."""

    @abc.abstractmethod
    def sym_seal(self, plain: Any, key: Any) -> Any: ...

    @abc.abstractmethod
    def sym_open(self, cipher: Any, key: Any) -> Optional[Any]: ...

    @abc.abstractmethod
    def digest(self, beacon_pub: Any) -> Any:
        """Report identifier: hash of the beacon public key."""

    @abc.abstractmethod
    def wrap_payload(self, inner: Any, timestamp: Any) -> Any:
        """Bundle the inner ciphertext with the sighting timestamp into the
        AEAD plaintext."""

    @abc.abstractmethod
    def unwrap_payload(self, plain: Any) -> Optional[tuple[Any, Any]]: ...


class SymbolicProvider(CryptoProvider):
    """Terms in, terms out.  Fresh names draw from a per-run counter so ids
    are unique within one scenario."""

    def __init__(self, system: RewriteSystem = DEFAULT_SYSTEM):
        self.system = system
        self._counter = 0

    def _fresh(self, label: str) -> FreshName:
        self._counter += 1
        return FreshName(label, self._counter)

    @property
    def fresh_count(self) -> int:
        return self._counter

    def checkpoint(self) -> int:
        return self._counter

    def restore(self, token: int) -> None:
        self._counter = token

    def fresh_secret(self, label: str) -> Term:
        return self._fresh(label)

    def fresh_symkey(self, label: str) -> Term:
        return self._fresh(label)

    def fresh_payload(self, label: str) -> Term:
        return self._fresh(label)

    def fresh_timestamp(self) -> Term:
        return self._fresh("tF")

    def pub_of(self, secret: Term) -> Term:
        return terms.pk(secret)

    def sk_next(self, sk_prev: Term) -> Term:
        return terms.sk_fn(sk_prev)

    def d_next(self, d0: Term, sk_i: Term) -> Term:
        return terms.di_fn(d0, sk_i)

    def ecdh(self, secret: Term, peer: Term) -> Term:
        return normalize(terms.ss_fn(secret, peer), self.system)

    def key_of(self, shared: Term, beacon_pub: Term) -> Term:
        return terms.key_gen(shared, beacon_pub)

    def iv_of(self, shared: Term, beacon_pub: Term) -> Term:
        return terms.nonce_gen(shared, beacon_pub)

    def aead_seal(self, key: Term, plain: Term, iv: Term) -> Term:
        return normalize(terms.aead_enc(key, plain, iv), self.system)

    def _open(self, applied: App) -> Optional[Term]:
        # Failure is the application being stuck, i.e. normalizing to itself
        # (up to normalized arguments) rather than contracting.
        out = normalize(applied, self.system)
        stuck = App(applied.fn, tuple(normalize(a, self.system) for a in applied.args))
        return None if out == stuck else out

    def aead_open(self, key: Term, cipher: Term, iv: Term) -> Optional[Term]:
        return self._open(terms.aead_authdec(key, cipher, iv))

    def sym_seal(self, plain: Term, key: Term) -> Term:
        return normalize(terms.senc(plain, key), self.system)

    def sym_open(self, cipher: Term, key: Term) -> Optional[Term]:
        return self._open(terms.sdec(cipher, key))

    def digest(self, beacon_pub: Term) -> Term:
        return terms.h(beacon_pub)

    def wrap_payload(self, inner: Term, timestamp: Term) -> Term:
        return Pair(inner, timestamp)

    def unwrap_payload(self, plain: Term) -> Optional[tuple[Term, Term]]:
        if isinstance(plain, Pair):
            return plain.left, plain.right
        return None
