"""First-order trace properties: quantifiers over events, timestamp ordering,
term equality, and adversary-knowledge atoms.

Quantification is event-guarded: `EvAll` ranges over every trace event of one
kind whose parameters match a pattern, `EvEx` asks for at least one.  Patterns
are terms with `Var` leaves; a repeated variable forces equality across
positions.  `KEx(t)` holds when the adversary can derive `t` somewhere in the
trace; knowledge only ever grows, so this is evaluated against the knowledge
base at the end of the trace under inspection (prefixes of a run are
themselves traces, so "knows it earlier" is caught when the prefix is
checked).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional

from .terms import App, Pair, Term, Var, normalize, render


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class AndF(Formula):
    items: tuple[Formula, ...]


@dataclass(frozen=True)
class OrF(Formula):
    items: tuple[Formula, ...]


@dataclass(frozen=True)
class NotF(Formula):
    item: Formula


@dataclass(frozen=True)
class ImpliesF(Formula):
    premise: Formula
    conclusion: Formula


@dataclass(frozen=True)
class EvAll(Formula):
    kind: str
    params: tuple[Term, ...]
    ts: str
    body: Formula


@dataclass(frozen=True)
class EvEx(Formula):
    kind: str
    params: tuple[Term, ...]
    ts: str
    body: Formula


@dataclass(frozen=True)
class KEx(Formula):
    """Adversary can derive the instantiated pattern."""

    pattern: Term


@dataclass(frozen=True)
class Before(Formula):
    earlier: str
    later: str


@dataclass(frozen=True)
class EqT(Formula):
    left: Term
    right: Term


def conj(*items: Formula) -> Formula:
    return AndF(tuple(items))


def disj(*items: Formula) -> Formula:
    return OrF(tuple(items))


@dataclass
class EvalContext:
    """Trace view a formula is evaluated against.

    events: list of (timestamp, kind, params) with step-index timestamps.
    derivable: adversary derivability test, or None when the backend has no
    symbolic knowledge base.
    apply_fn: backend interpretation of a function symbol applied to concrete
    values, used when an equality pattern builds a term around bound values.
    """

    events: list[tuple[int, str, tuple]]
    derivable: Optional[Callable[[Term], bool]] = None
    apply_fn: Optional[Callable[[str, tuple], Any]] = None


class UnsupportedAtom(RuntimeError):
    """Formula uses an atom the active backend cannot evaluate."""


_UNBOUND = object()


def _match(pattern: Term, value: Any, env: dict) -> Optional[dict]:
    if isinstance(pattern, Var):
        bound = env.get(pattern.name, _UNBOUND)
        if bound is _UNBOUND:
            env = dict(env)
            env[pattern.name] = value
            return env
        return env if bound == value else None
    if isinstance(pattern, Pair):
        if not isinstance(value, Pair):
            return None
        env2 = _match(pattern.left, value.left, env)
        if env2 is None:
            return None
        return _match(pattern.right, value.right, env2)
    if isinstance(pattern, App):
        if not isinstance(value, App) or value.fn != pattern.fn:
            return None
        for p_arg, v_arg in zip(pattern.args, value.args):
            env = _match(p_arg, v_arg, env)
            if env is None:
                return None
        return env
    return env if pattern == value else None


def _instantiate(pattern: Term, env: dict, ctx: EvalContext) -> Any:
    if isinstance(pattern, Var):
        if pattern.name not in env:
            raise UnsupportedAtom(f"unbound variable ?{pattern.name}")
        return env[pattern.name]
    if isinstance(pattern, Pair):
        left = _instantiate(pattern.left, env, ctx)
        right = _instantiate(pattern.right, env, ctx)
        if isinstance(left, Term) and isinstance(right, Term):
            return Pair(left, right)
        raise UnsupportedAtom("pair pattern over non-term values")
    if isinstance(pattern, App):
        args = tuple(_instantiate(a, env, ctx) for a in pattern.args)
        if ctx.apply_fn is not None:
            return ctx.apply_fn(pattern.fn, args)
        if all(isinstance(a, Term) for a in args):
            return normalize(App(pattern.fn, args))
        raise UnsupportedAtom(f"cannot apply {pattern.fn} to backend values")
    return pattern


def _matches(ctx: EvalContext, node: EvAll | EvEx, env: dict):
    for ts, kind, params in ctx.events:
        if kind != node.kind or len(params) != len(node.params):
            continue
        env2: Optional[dict] = env
        for pat, val in zip(node.params, params):
            env2 = _match(pat, val, env2)
            if env2 is None:
                break
        if env2 is None:
            continue
        env3 = dict(env2)
        env3[node.ts] = ts
        yield env3


def holds(node: Formula, env: dict, ctx: EvalContext) -> bool:
    if isinstance(node, TrueF):
        return True
    if isinstance(node, AndF):
        return all(holds(x, env, ctx) for x in node.items)
    if isinstance(node, OrF):
        return any(holds(x, env, ctx) for x in node.items)
    if isinstance(node, NotF):
        return not holds(node.item, env, ctx)
    if isinstance(node, ImpliesF):
        return not holds(node.premise, env, ctx) or holds(node.conclusion, env, ctx)
    if isinstance(node, EvAll):
        return all(holds(node.body, e, ctx) for e in _matches(ctx, node, env))
    if isinstance(node, EvEx):
        return any(holds(node.body, e, ctx) for e in _matches(ctx, node, env))
    if isinstance(node, KEx):
        if ctx.derivable is None:
            raise UnsupportedAtom("adversary knowledge atoms need the symbolic backend")
        target = _instantiate(node.pattern, env, ctx)
        if not isinstance(target, Term):
            raise UnsupportedAtom("knowledge atom over non-term value")
        return ctx.derivable(target)
    if isinstance(node, Before):
        return env[node.earlier] < env[node.later]
    if isinstance(node, EqT):
        return _instantiate(node.left, env, ctx) == _instantiate(node.right, env, ctx)
    raise TypeError(f"not a formula node: {node!r}")


def failing_env(node: Formula, env: dict, ctx: EvalContext) -> dict:
    """Bindings at the innermost failing universal instantiation; used to
    report counterexample witnesses.  Call only when `holds` is False."""
    if isinstance(node, EvAll):
        for e in _matches(ctx, node, env):
            if not holds(node.body, e, ctx):
                return failing_env(node.body, e, ctx)
    if isinstance(node, ImpliesF):
        if holds(node.premise, env, ctx):
            return failing_env(node.conclusion, env, ctx)
    if isinstance(node, AndF):
        for item in node.items:
            if not holds(item, env, ctx):
                return failing_env(item, env, ctx)
    return env


def event_kinds(node: Formula) -> frozenset[str]:
    if isinstance(node, (EvAll, EvEx)):
        return frozenset({node.kind}) | event_kinds(node.body)
    if isinstance(node, AndF) or isinstance(node, OrF):
        out: frozenset[str] = frozenset()
        for item in node.items:
            out |= event_kinds(item)
        return out
    if isinstance(node, NotF):
        return event_kinds(node.item)
    if isinstance(node, ImpliesF):
        return event_kinds(node.premise) | event_kinds(node.conclusion)
    return frozenset()


def mentions_knowledge(node: Formula) -> bool:
    if isinstance(node, KEx):
        return True
    if isinstance(node, (EvAll, EvEx)):
        return mentions_knowledge(node.body)
    if isinstance(node, (AndF, OrF)):
        return any(mentions_knowledge(x) for x in node.items)
    if isinstance(node, NotF):
        return mentions_knowledge(node.item)
    if isinstance(node, ImpliesF):
        return mentions_knowledge(node.premise) or mentions_knowledge(node.conclusion)
    return False


def k_targets(node: Formula, env: dict, ctx: EvalContext) -> list[Term]:
    """Instantiated knowledge-atom targets under `env`, for proof reporting."""
    out: list[Term] = []

    def walk(n: Formula) -> None:
        if isinstance(n, KEx):
            try:
                t = _instantiate(n.pattern, env, ctx)
            except UnsupportedAtom:
                return
            if isinstance(t, Term):
                out.append(t)
        elif isinstance(n, (EvAll, EvEx)):
            walk(n.body)
        elif isinstance(n, (AndF, OrF)):
            for item in n.items:
                walk(item)
        elif isinstance(n, NotF):
            walk(n.item)
        elif isinstance(n, ImpliesF):
            walk(n.premise)
            walk(n.conclusion)

    walk(node)
    return out


def render_env(env: dict) -> dict[str, str]:
    out = {}
    for name, value in sorted(env.items()):
        if isinstance(value, Term):
            out[name] = render(value)
        elif isinstance(value, bytes):
            out[name] = value.hex()
        else:
            out[name] = str(value)
    return out
