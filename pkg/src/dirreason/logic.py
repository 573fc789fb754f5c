"""Propositional value types and contrapositive rule augmentation.

Atoms are unary ground propositions ``predicate(subject)``.  A literal is a
signed atom, and a rule is a conjunction of literals implying one literal::

    fine(weather) -> drives_to_work(Bob)
    a(x) & !b(y) -> c(z)

``augment`` extends a rule set with every contrapositive of every rule.  For a
rule ``a1 & ... & an -> c`` the i-th contrapositive moves ``!c`` into the body
and concludes ``!ai``; with a single antecedent this is the familiar
``!q -> !p``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional

_IDENT = re.compile(r"^[A-Za-z0-9_]+$")

# Verb morphology for "does not drive" <-> "drives".
_IRREGULAR_3SG = {"have": "has", "do": "does", "go": "goes", "be": "is"}
_IRREGULAR_BASE = {v: k for k, v in _IRREGULAR_3SG.items()}


class MalformedRule(ValueError):
    pass


def third_person(verb: str) -> str:
    """Inflect a base verb: drive -> drives, watch -> watches, fly -> flies."""
    v = verb.lower()
    if v in _IRREGULAR_3SG:
        return _IRREGULAR_3SG[v]
    if v.endswith(("s", "x", "z", "ch", "sh", "o")):
        return v + "es"
    if len(v) > 1 and v.endswith("y") and v[-2] not in "aeiou":
        return v[:-1] + "ies"
    return v + "s"


def base_form(verb: str) -> str:
    """Inverse of :func:`third_person` for regular and listed irregular verbs."""
    v = verb.lower()
    if v in _IRREGULAR_BASE:
        return _IRREGULAR_BASE[v]
    if v.endswith("ies") and len(v) > 3:
        return v[:-3] + "y"
    if v.endswith(("sses", "xes", "zzes", "ches", "shes", "oes")):
        return v[:-2]
    if v.endswith("s"):
        return v[:-1]
    return v


def looks_inflected(word: str) -> bool:
    """Heuristic: does ``word`` read as a third-person singular verb?"""
    w = word.lower()
    if w in _IRREGULAR_BASE:
        return True
    return len(w) > 2 and w.endswith("s") and not w.endswith(("ss", "us", "is"))


@dataclass(frozen=True, eq=False)
class Atom:
    """A ground proposition ``predicate(subject)``.

    The predicate is stored lowercased.  The subject keeps its surface casing
    for display ("Bob") but equality and hashing fold case, so ``Bob`` and
    ``BOB`` name the same individual.  ``copular`` records whether the atom
    came from an "is <adjective>" phrase (True), a verb phrase (False), or a
    compact form (None); it only affects natural-language rendering.
    """

    subject: str
    predicate: str
    copular: Optional[bool] = None

    def __post_init__(self):
        subject = self.subject.strip()
        predicate = self.predicate.strip().lower()
        for name, tok in (("subject", subject), ("predicate", predicate)):
            if not tok or not _IDENT.match(tok):
                raise ValueError(f"invalid {name} token: {tok!r}")
        object.__setattr__(self, "subject", subject)
        object.__setattr__(self, "predicate", predicate)

    @property
    def key(self) -> tuple[str, str]:
        return (self.predicate, self.subject.lower())

    def __eq__(self, other):
        if not isinstance(other, Atom):
            return NotImplemented
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __lt__(self, other: "Atom") -> bool:
        return self.key < other.key

    def __repr__(self):
        return f"{self.predicate}({self.subject})"


@dataclass(frozen=True)
class Literal:
    atom: Atom
    positive: bool = True

    def __neg__(self) -> "Literal":
        return Literal(self.atom, not self.positive)

    def __invert__(self) -> "Literal":
        return -self

    def sort_key(self):
        return (self.atom.key, not self.positive)

    def __repr__(self):
        return ("" if self.positive else "!") + repr(self.atom)


def negate(lit: Literal) -> Literal:
    return -lit


def lit(predicate: str, subject: str, positive: bool = True) -> Literal:
    """Shorthand constructor, mostly for tests and examples."""
    return Literal(Atom(subject, predicate), positive)


@dataclass(frozen=True)
class Rule:
    """``antecedents[0] & ... & antecedents[-1] -> consequent``.

    ``rid`` and ``source`` are bookkeeping and do not take part in equality:
    ``source`` is None for an original rule and otherwise the id of the rule
    this one was contraposed from (``"llm"`` when an LLM produced it).
    """

    antecedents: tuple[Literal, ...]
    consequent: Literal
    rid: str = field(default="", compare=False)
    source: Optional[str] = field(default=None, compare=False)
    text: Optional[str] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        ants = tuple(self.antecedents)
        object.__setattr__(self, "antecedents", ants)
        if not ants:
            raise MalformedRule("rule needs at least one antecedent")
        if len(set(ants)) != len(ants):
            raise MalformedRule(f"duplicate antecedent in {self!r}")
        if self.consequent in ants:
            raise MalformedRule(f"consequent repeats an antecedent in {self!r}")

    @property
    def is_original(self) -> bool:
        return self.source is None

    @property
    def key(self) -> tuple[frozenset, Literal]:
        return (frozenset(self.antecedents), self.consequent)

    def atoms(self) -> set[Atom]:
        return {l.atom for l in self.antecedents} | {self.consequent.atom}

    def __repr__(self):
        body = " & ".join(map(repr, self.antecedents))
        return f"{body} -> {self.consequent!r}"


class RuleSet:
    """Ordered, deduplicated collection of rules with stable ids.

    Rules without an id get ``r<n>`` by position.  A rule whose key
    (antecedent set, consequent) was already seen is dropped.
    """

    def __init__(self, rules: Iterable[Rule] = ()):
        self._rules: list[Rule] = []
        self._keys: set = set()
        self._by_id: dict[str, Rule] = {}
        for rule in rules:
            self._add(rule)

    def _add(self, rule: Rule) -> bool:
        if rule.key in self._keys:
            return False
        if not rule.rid:
            n = len(self._rules) + 1
            while f"r{n}" in self._by_id:
                n += 1
            rule = replace(rule, rid=f"r{n}")
        if rule.rid in self._by_id:
            raise ValueError(f"duplicate rule id {rule.rid}")
        self._rules.append(rule)
        self._keys.add(rule.key)
        self._by_id[rule.rid] = rule
        return True

    def __iter__(self) -> Iterator[Rule]:
        return iter(self._rules)

    def __len__(self):
        return len(self._rules)

    def __getitem__(self, i: int) -> Rule:
        return self._rules[i]

    def __contains__(self, rule: Rule) -> bool:
        return rule.key in self._keys

    def __eq__(self, other):
        if not isinstance(other, RuleSet):
            return NotImplemented
        return self._rules == other._rules

    def __repr__(self):
        return f"RuleSet({self._rules!r})"

    def get(self, rid: str) -> Optional[Rule]:
        return self._by_id.get(rid)

    def keys(self) -> set:
        return set(self._keys)

    def atoms(self) -> set[Atom]:
        out: set[Atom] = set()
        for r in self._rules:
            out |= r.atoms()
        return out

    def extended(self, rules: Iterable[Rule]) -> "RuleSet":
        """A copy with ``rules`` appended (duplicates dropped)."""
        out = RuleSet(self._rules)
        for r in rules:
            out._add(r)
        return out


def contrapositives(rule: Rule) -> list[Rule]:
    """One contrapositive per antecedent, in antecedent order.

    Contrapositives that would be tautologies (the new consequent already in
    the new body) are skipped; they only arise from rules whose body mentions
    the negated consequent.
    """
    out = []
    neg_c = -rule.consequent
    for i, a in enumerate(rule.antecedents):
        body = [neg_c]
        for j, other in enumerate(rule.antecedents):
            if j != i and other not in body:
                body.append(other)
        head = -a
        if head in body:
            continue
        rid = f"{rule.rid}.c{i + 1}" if rule.rid else ""
        out.append(Rule(tuple(body), head, rid=rid, source=rule.rid or "?"))
    return out


def augment(rules: RuleSet | Iterable[Rule]) -> RuleSet:
    """Original rules followed by the contrapositives of every rule."""
    rs = rules if isinstance(rules, RuleSet) else RuleSet(rules)
    extra = []
    for r in rs:
        extra.extend(contrapositives(r))
    return rs.extended(extra)
