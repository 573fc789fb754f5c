"""Direct and proof-by-contradiction reasoning over propositional rule bases.

Both reasoners are built on the same unit-propagation engine
(:func:`forward_closure`): a rule fires once all of its antecedents are
established, and nothing is ever case-split.  :func:`model_check` enumerates
truth assignments and serves as the ground-truth entailment oracle in tests.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .logic import Atom, Literal, RuleSet

MAX_ORACLE_ATOMS = 20

FACT = "fact"
ASSUMPTION = "assumption"


class Answer(str, enum.Enum):
    TRUE = "True"
    FALSE = "False"
    UNKNOWN = "Unknown"

    @classmethod
    def parse(cls, text: str) -> "Answer":
        for a in cls:
            if a.value.lower() == text.strip().lower():
                return a
        raise ValueError(f"not an answer: {text!r}")

    @property
    def definite(self) -> bool:
        return self is not Answer.UNKNOWN

    def __str__(self):
        return self.value


class Mode(str, enum.Enum):
    DIRECT = "direct"
    CONTRADICTION = "contradiction"

    def __str__(self):
        return self.value


class InconsistentKB(ValueError):
    """The facts (or their unit-propagation closure) contain a complementary pair."""

    def __init__(self, pair, msg=None):
        self.pair = pair
        super().__init__(msg or f"inconsistent knowledge base: {pair[0]!r} / {pair[1]!r}")


class TooManyAtoms(ValueError):
    pass


class _Inconsistent:
    """Singleton returned by :func:`model_check` when F and R have no model."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INCONSISTENT"

    def __reduce__(self):
        return (_Inconsistent, ())


INCONSISTENT = _Inconsistent()


@dataclass(frozen=True, init=False)
class KnowledgeBase:
    facts: frozenset
    rules: RuleSet

    def __init__(self, facts: Iterable[Literal] = (), rules: Union[RuleSet, Iterable] = ()):
        facts = frozenset(facts)
        for f in facts:
            if -f in facts:
                pair = tuple(sorted((f, -f), key=Literal.sort_key))
                raise InconsistentKB(pair)
        object.__setattr__(self, "facts", facts)
        object.__setattr__(self, "rules", rules if isinstance(rules, RuleSet) else RuleSet(rules))

    def atoms(self) -> set[Atom]:
        return {f.atom for f in self.facts} | self.rules.atoms()


@dataclass(frozen=True)
class Step:
    literal: Literal
    via: str  # rule id, FACT or ASSUMPTION

    def __repr__(self):
        return f"{self.literal!r} via {self.via}"


@dataclass(frozen=True)
class ProofTrace:
    mode: Mode
    steps: tuple[Step, ...] = ()
    verdict: Answer = Answer.UNKNOWN
    assumption: Optional[Literal] = None
    contradiction_pair: Optional[tuple[Literal, Literal]] = None
    question: Optional[Literal] = None

    @property
    def length(self) -> int:
        return len(self.steps)


@dataclass
class Closure:
    """Result of :func:`forward_closure`.

    ``conflict`` is set when propagation produced a literal whose complement
    was already established; propagation stops at that point.  The pair is
    ordered (newly derived, previously established).
    """

    literals: set
    steps: list
    conflict: Optional[tuple[Literal, Literal]] = None
    derived_by: dict = field(default_factory=dict)

    @property
    def consistent(self) -> bool:
        return self.conflict is None


def forward_closure(kb: KnowledgeBase, assumption: Optional[Literal] = None) -> Closure:
    known = set(kb.facts)
    steps: list[Step] = []
    derived_by: dict[Literal, Step] = {}
    if assumption is not None:
        if -assumption in known:
            return Closure(known | {assumption}, steps, (assumption, -assumption), derived_by)
        known.add(assumption)
    changed = True
    while changed:
        changed = False
        for rule in kb.rules:
            c = rule.consequent
            if c in known:
                continue
            if all(a in known for a in rule.antecedents):
                step = Step(c, rule.rid)
                steps.append(step)
                derived_by[c] = step
                known.add(c)
                if -c in known:
                    return Closure(known, steps, (c, -c), derived_by)
                changed = True
    return Closure(known, steps, None, derived_by)


def _support(closure: Closure, targets: Iterable[Literal], kb: KnowledgeBase) -> tuple[Step, ...]:
    """Steps of ``closure`` that the ``targets`` transitively depend on, in derivation order."""
    needed: set[Step] = set()
    stack = list(targets)
    while stack:
        l = stack.pop()
        step = closure.derived_by.get(l)
        if step is None or step in needed:
            continue
        needed.add(step)
        stack.extend(kb.rules.get(step.via).antecedents)
    return tuple(s for s in closure.steps if s in needed)


def direct_answer(kb: KnowledgeBase, question: Literal) -> tuple[Answer, ProofTrace]:
    closure = forward_closure(kb)
    if closure.conflict:
        raise InconsistentKB(closure.conflict)
    for target, verdict in ((question, Answer.TRUE), (-question, Answer.FALSE)):
        if target in closure.literals:
            if target in kb.facts:
                steps = (Step(target, FACT),)
            else:
                steps = _support(closure, [target], kb)
            return verdict, ProofTrace(Mode.DIRECT, steps, verdict, question=question)
    return Answer.UNKNOWN, ProofTrace(Mode.DIRECT, (), Answer.UNKNOWN, question=question)


def indirect_answer(kb: KnowledgeBase, question: Literal) -> tuple[Answer, ProofTrace]:
    """Assume the negated question; a contradiction proves it.  Failing that,
    assume the question itself; a contradiction there disproves it."""
    base = forward_closure(kb)
    if base.conflict:
        raise InconsistentKB(base.conflict)
    for assumption, verdict in ((-question, Answer.TRUE), (question, Answer.FALSE)):
        closure = forward_closure(kb, assumption)
        if closure.conflict:
            steps = _support(closure, closure.conflict, kb)
            trace = ProofTrace(Mode.CONTRADICTION, steps, verdict, assumption,
                               closure.conflict, question)
            return verdict, trace
    trace = ProofTrace(Mode.CONTRADICTION, (), Answer.UNKNOWN, -question, None, question)
    return Answer.UNKNOWN, trace


def _holds(l: Literal, world: dict) -> bool:
    return world[l.atom] == l.positive


def model_check(kb: KnowledgeBase, question: Literal):
    """Truth-table entailment: Answer, or INCONSISTENT if F and R have no model."""
    atoms = sorted(kb.atoms() | {question.atom})
    if len(atoms) > MAX_ORACLE_ATOMS:
        raise TooManyAtoms(f"{len(atoms)} atoms exceeds the cap of {MAX_ORACLE_ATOMS}")
    rules = list(kb.rules)
    any_model = q_somewhere = notq_somewhere = False
    for values in itertools.product((False, True), repeat=len(atoms)):
        world = dict(zip(atoms, values))
        if not all(_holds(f, world) for f in kb.facts):
            continue
        if not all(_holds(r.consequent, world) or not all(_holds(a, world) for a in r.antecedents)
                   for r in rules):
            continue
        any_model = True
        if _holds(question, world):
            q_somewhere = True
        else:
            notq_somewhere = True
        if q_somewhere and notq_somewhere:
            return Answer.UNKNOWN
    if not any_model:
        return INCONSISTENT
    return Answer.TRUE if q_somewhere else Answer.FALSE


@dataclass(frozen=True)
class TraceCheck:
    valid: bool
    reason: Optional[str] = None

    def __bool__(self):
        return self.valid


def check_trace(kb: KnowledgeBase, trace: ProofTrace, question: Optional[Literal] = None) -> TraceCheck:
    """Mechanically verify a proof trace against ``kb``.

    ``question`` overrides ``trace.question``; one of them must be given so the
    verdict can be checked.
    """
    q = question if question is not None else trace.question
    if q is None:
        return TraceCheck(False, "no question to check the verdict against")
    contradiction = trace.mode is Mode.CONTRADICTION
    if contradiction and trace.assumption is None:
        return TraceCheck(False, "contradiction trace without assumption")
    if not contradiction and trace.assumption is not None:
        return TraceCheck(False, "direct trace with an assumption")

    established = set(kb.facts)
    if trace.assumption is not None:
        established.add(trace.assumption)
    for step in trace.steps:
        if step.via == FACT:
            ok = step.literal in kb.facts
        elif step.via == ASSUMPTION:
            ok = contradiction and step.literal == trace.assumption
        else:
            rule = kb.rules.get(step.via)
            if rule is None:
                return TraceCheck(False, f"unknown rule {step.via}")
            if rule.consequent != step.literal:
                return TraceCheck(False, f"rule {step.via} does not conclude {step.literal!r}")
            ok = all(a in established for a in rule.antecedents)
        if not ok:
            return TraceCheck(False, "unlicensed step")
        established.add(step.literal)

    pair = trace.contradiction_pair
    if not contradiction:
        if pair is not None:
            return TraceCheck(False, "direct trace with a contradiction pair")
        if trace.verdict is Answer.TRUE and q not in established:
            return TraceCheck(False, "question not established")
        if trace.verdict is Answer.FALSE and -q not in established:
            return TraceCheck(False, "negated question not established")
        if trace.verdict is Answer.UNKNOWN:
            closure = forward_closure(kb)
            if q in closure.literals or -q in closure.literals:
                return TraceCheck(False, "question is decidable by propagation")
        return TraceCheck(True)

    if trace.verdict is Answer.UNKNOWN:
        if pair is not None:
            return TraceCheck(False, "contradiction pair with Unknown verdict")
        for assumption in (-q, q):
            if forward_closure(kb, assumption).conflict:
                return TraceCheck(False, "a contradiction is derivable")
        return TraceCheck(True)
    if pair is None:
        return TraceCheck(False, "missing contradiction pair")
    if pair[0] != -pair[1]:
        return TraceCheck(False, "pair not complementary")
    if not (pair[0] in established and pair[1] in established):
        return TraceCheck(False, "pair not established")
    expected = -q if trace.verdict is Answer.TRUE else q
    if trace.assumption != expected:
        return TraceCheck(False, "assumption does not match verdict")
    return TraceCheck(True)
