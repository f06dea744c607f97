"""Static stack-effect inference and checking.

A stack effect is a pair of tag lists (pops, pushes) describing how a rule
changes the value stack. Both lists are deepest-first: the rightmost pop is
the top of the stack (popped first) and the rightmost push is pushed last.
Composition across sequencing, prioritized choice and repetition lets the
checker prove, before any parse, that no rule pops an empty stack and that
popped values carry the tags the popping site expects.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from . import rules as r
from .values import Tree, Value

WILDCARD = "*"


@dataclass(frozen=True, slots=True)
class StackEffect:
    pops: tuple[str, ...] = ()
    pushes: tuple[str, ...] = ()

    def __str__(self) -> str:
        return f"([{','.join(self.pops)}],[{','.join(self.pushes)}])"


NEUTRAL = StackEffect()


class EffectError(Exception):
    pass


class EffectMismatch(EffectError):
    """Top-aligned overlap of two composed effects failed to unify."""

    def __init__(self, position: int, expected: str, found: str):
        self.position = position  # 0 = top of stack
        self.expected = expected
        self.found = found
        super().__init__(f"effect mismatch {position} below top: expected {expected}, found {found}")


class BranchEffectMismatch(EffectError):
    def __init__(self, index: int, detail: str = ""):
        self.index = index
        super().__init__(f"alternative {index} does not unify with the preceding alternatives"
                         + (f": {detail}" if detail else ""))


class UnsupportedRepetitionEffect(EffectError):
    def __init__(self, effect: StackEffect, kind: str):
        self.effect = effect
        self.kind = kind
        super().__init__(f"{kind} body with effect {effect} is neither a reduction, "
                         f"a single-value collector, nor neutral")


class UndeclaredRecursiveRule(EffectError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"rule {name!r} is used recursively and needs a declared effect")


class StartRulePops(EffectError):
    def __init__(self, rule: str, pops: tuple[str, ...]):
        self.rule = rule
        self.pops = pops
        super().__init__(f"start rule {rule!r} pops from an initially empty stack: [{','.join(pops)}]")


class EffectCheckError(Exception):
    """Aggregated per-rule effect errors from check_grammar."""

    def __init__(self, issues: list[tuple[str, EffectError]]):
        self.issues = issues
        super().__init__("; ".join(f"{name}: {err}" for name, err in issues))


def unify_tag(a: str, b: str) -> str | None:
    """Purely syntactic: wildcard matches anything, concrete tags must be equal."""
    if a == WILDCARD:
        return b
    if b == WILDCARD or a == b:
        return a
    return None


def seq_compose(lhs: StackEffect, rhs: StackEffect) -> StackEffect:
    """Compose two effects executed in sequence.

    The rightmost min(|lhs.pushes|, |rhs.pops|) tags must unify pairwise;
    the survivors concatenate. If the right side pops more than the left
    pushed, the deficit is demanded from deeper in the stack.
    """
    k = min(len(lhs.pushes), len(rhs.pops))
    for i in range(1, k + 1):
        if unify_tag(lhs.pushes[-i], rhs.pops[-i]) is None:
            raise EffectMismatch(i - 1, rhs.pops[-i], lhs.pushes[-i])
    if len(lhs.pushes) >= len(rhs.pops):
        surplus = lhs.pushes[:len(lhs.pushes) - k]
        return StackEffect(lhs.pops, surplus + rhs.pushes)
    deficit = rhs.pops[:len(rhs.pops) - k]
    return StackEffect(deficit + lhs.pops, rhs.pushes)


def _unify_lists(a: tuple[str, ...], b: tuple[str, ...]) -> tuple[str, ...] | None:
    if len(a) != len(b):
        return None
    out = []
    for x, y in zip(a, b):
        u = unify_tag(x, y)
        if u is None:
            return None
        out.append(u)
    return tuple(out)


def choice_compose(effects: list[StackEffect]) -> StackEffect:
    """All alternatives of a prioritized choice must share one effect."""
    if len(effects) < 2:
        raise ValueError("choice_compose needs at least two effects")
    pops, pushes = effects[0].pops, effects[0].pushes
    for i, eff in enumerate(effects[1:], start=1):
        p = _unify_lists(pops, eff.pops)
        q = _unify_lists(pushes, eff.pushes)
        if p is None or q is None:
            raise BranchEffectMismatch(i, f"{StackEffect(pops, pushes)} vs {eff}")
        pops, pushes = p, q
    return StackEffect(pops, pushes)


def repetition_shape(inner: StackEffect) -> tuple[str, tuple[str, ...] | str | None]:
    """Classify a repetition body effect.

    Returns ("neutral", None), ("reduction", resolved pushes) when the
    pushes re-supply the topmost pops, or ("collecting", element tag) for a
    body that pushes exactly one value and pops nothing.
    """
    if inner == NEUTRAL:
        return "neutral", None
    k = len(inner.pushes)
    if k and len(inner.pops) >= k:
        resolved = _unify_lists(inner.pushes, inner.pops[len(inner.pops) - k:])
        if resolved is not None:
            return "reduction", resolved
    if not inner.pops and k == 1:
        return "collecting", inner.pushes[0]
    raise UnsupportedRepetitionEffect(inner, "repetition")


def repetition_effect(inner: StackEffect, kind: str) -> StackEffect:
    """Effect of optional / zeroOrMore / oneOrMore over a body effect."""
    if kind not in ("zeroOrMore", "oneOrMore", "optional"):
        raise ValueError(f"unknown repetition kind {kind!r}")
    try:
        shape, info = repetition_shape(inner)
    except UnsupportedRepetitionEffect:
        raise UnsupportedRepetitionEffect(inner, kind) from None
    if shape == "neutral":
        return NEUTRAL
    if shape == "collecting":
        return StackEffect((), (f"ListOf({info})",))
    if kind == "oneOrMore":
        return inner
    return StackEffect(info, info)


# ---------------------------------------------------------------------------
# inference over expression trees

_REP_KIND = {r.Optional: "optional", r.ZeroOrMore: "zeroOrMore", r.OneOrMore: "oneOrMore"}


def infer_effect(expr: r.RuleExpr, g: r.Grammar, _active: frozenset[str] = frozenset()) -> StackEffect:
    """Infer the stack effect of an expression within a grammar.

    Basic matchers are neutral. References use the declared effect when one
    exists; otherwise inference recurses through the target, which must not
    be cyclic (cyclic rules require declarations).
    """
    t = type(expr)
    if t in r.TERMINALS:
        return NEUTRAL
    if t is r.Capture:
        inner = infer_effect(expr.inner, g, _active)
        return StackEffect(inner.pops, inner.pushes + ("Str",))
    if t is r.Push:
        if expr.value.tag == "Unit":
            return NEUTRAL
        return StackEffect((), (expr.value.tag,))
    if t is r.Drop:
        return StackEffect((WILDCARD,) * expr.count, ())
    if t is r.Action:
        return expr.effect
    if t is r.Quiet:
        return infer_effect(expr.inner, g, _active)
    if t in (r.AndPredicate, r.NotPredicate):
        infer_effect(expr.inner, g, _active)  # the body must still check
        return NEUTRAL
    if t is r.Sequence:
        eff = NEUTRAL
        for child in expr.children:
            eff = seq_compose(eff, infer_effect(child, g, _active))
        return eff
    if t is r.FirstOf:
        branches = [infer_effect(a, g, _active) for a in expr.alternatives]
        if len(branches) == 1:
            return branches[0]
        return choice_compose(branches)
    if t in _REP_KIND:
        return repetition_effect(infer_effect(expr.inner, g, _active), _REP_KIND[t])
    if t is r.RuleRef:
        rd = g.rules[expr.name]
        if rd.effect is not None:
            return rd.effect
        if expr.name in _active:
            raise UndeclaredRecursiveRule(expr.name)
        return infer_effect(rd.expr, g, _active | {expr.name})
    raise TypeError(f"unknown rule expression: {expr!r}")


def check_grammar(g: r.Grammar) -> dict[str, StackEffect]:
    """Check every rule's effect and return the per-rule report.

    Each inferred effect must unify with the rule's declaration (if any),
    and the start rule must pop nothing, since a run begins with an empty
    stack. Raises EffectCheckError with all per-rule failures.
    """
    issues: list[tuple[str, EffectError]] = []
    report: dict[str, StackEffect] = {}
    for name, rd in g.rules.items():
        try:
            inferred = infer_effect(rd.expr, g, frozenset({name}))
            if rd.effect is not None:
                pops = _unify_lists(inferred.pops, rd.effect.pops)
                pushes = _unify_lists(inferred.pushes, rd.effect.pushes)
                if pops is None or pushes is None:
                    raise EffectMismatch(0, str(rd.effect), str(inferred))
                inferred = StackEffect(pops, pushes)
            report[name] = inferred
        except EffectError as err:
            issues.append((name, err))
    if g.start in report and report[g.start].pops:
        issues.append((g.start, StartRulePops(g.start, report[g.start].pops)))
    if issues:
        raise EffectCheckError(issues)
    return report


# ---------------------------------------------------------------------------
# node-building actions


@lru_cache(maxsize=None)
def _cons_fn(label: str, arity: int):
    def build(*args: Value) -> Value:
        return Value("Node", Tree(label, tuple(args)))

    build.__name__ = f"cons_{label}_{arity}"
    return build


def cons(label: str, arity: int, pops: tuple[str, ...] | None = None,
         push: str = "Node") -> r.Action:
    """Action that pops ``arity`` values and pushes the node Label(v1..vn).

    Arguments are assigned deepest-first: the first popped value becomes the
    last child. Pop tags default to wildcards.
    """
    effect = StackEffect(pops if pops is not None else (WILDCARD,) * arity, (push,))
    return r.Action(arity, _cons_fn(label, arity), effect, name=f"cons({label},{arity})")
