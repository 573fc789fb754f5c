"""Controlled-language parsing, canonical serialization and dataset loading.

Literal grammar (case-insensitive, trailing period allowed)::

    <subject> is [not] <adjective phrase>      The weather is not fine
    <subject> does [not] <verb phrase>         Bob does not drive to work
    <subject> <inflected verb phrase>          Bob drives to work
    [!]predicate(subject)                      !drives_to_work(Bob)

Rule grammar::

    If <lit> (and <lit>)* (then|,) <lit>
    <lit> (& <lit>)* -> <lit>

Verb phrases are slugified into predicate tokens, with the verb in third
person: "does not drive to work" and "drives to work" both become
``drives_to_work``.  A leading determiner (the/a/an) is dropped from subjects.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

from .logic import Atom, Literal, MalformedRule, Rule, RuleSet, base_form, looks_inflected, third_person
from .reasoner import Answer

DETERMINERS = {"the", "a", "an"}
TASKS = ("factual", "math-proof")

_COMPACT_LIT = re.compile(r"^\s*([!~¬])?\s*([A-Za-z0-9_]+)\s*\(\s*([A-Za-z0-9_]+)\s*\)\s*$")
_WORD = re.compile(r"[^\s,]+")


class ParseError(ValueError):
    """Raised with the byte offset into the input and a hint of what was expected."""

    def __init__(self, message: str, text: str = "", offset: int = 0,
                 expected: Optional[str] = None, line: Optional[int] = None):
        self.text = text
        self.offset = offset
        self.expected = expected
        self.line = line
        self.message = message
        super().__init__(str(self))

    def __str__(self):
        where = f"line {self.line}: " if self.line is not None else ""
        hint = f" (expected {self.expected})" if self.expected else ""
        return f"{where}{self.message} at byte {self.offset}{hint}"


class SchemaError(ValueError):
    def __init__(self, line: int, field: str, message: str):
        self.line = line
        self.field = field
        super().__init__(f"line {line}: field {field!r}: {message}")


def _byte_offset(text: str, char_index: int) -> int:
    return len(text[:char_index].encode("utf-8"))


def _strip_sentence(text: str) -> str:
    return text.strip().rstrip(".").strip()


def parse_literal(text: str) -> Literal:
    if not text or not text.strip():
        raise ParseError("empty literal", text, 0, "a statement")
    body = _strip_sentence(text)
    m = _COMPACT_LIT.match(body)
    if m:
        neg, pred, subj = m.groups()
        return Literal(Atom(subj, pred), positive=not neg)

    words = [(w.group(), w.start()) for w in _WORD.finditer(body)]
    lower = [w.lower() for w, _ in words]
    for i, w in enumerate(lower):
        if w in ("is", "does", "isn't", "doesn't"):
            copula = i
            break
    else:
        copula = None

    start = 1 if lower and lower[0] in DETERMINERS else 0
    if copula is None:
        for i in range(start + 1, len(lower)):
            if looks_inflected(lower[i]):
                verb_at = i
                break
        else:
            raise ParseError("no verb found", text, _byte_offset(text, len(body)),
                             "'is', 'does' or an inflected verb")
        subject, rest, copular, positive = words[start:verb_at], words[verb_at:], False, True
    else:
        if copula <= start:
            raise ParseError("missing subject", text, 0, "subject")
        subject, rest = words[start:copula], words[copula + 1:]
        kw = lower[copula]
        positive = not kw.endswith("n't")
        copular = kw.startswith("is")
        if positive and rest and rest[0][0].lower() == "not":
            positive = False
            rest = rest[1:]
        if not rest:
            raise ParseError("missing predicate", text, _byte_offset(text, len(body)), "predicate phrase")
        if not copular:
            rest = [(third_person(rest[0][0]), rest[0][1])] + rest[1:]

    pred_words = [w for w, _ in rest]
    try:
        atom = Atom("_".join(w for w, _ in subject), "_".join(pred_words).lower(), copular)
    except ValueError as exc:
        raise ParseError(str(exc), text, _byte_offset(text, subject[0][1] if subject else 0),
                         "identifier words") from None
    return Literal(atom, positive)


_IF = re.compile(r"^\s*if\b", re.IGNORECASE)
_THEN = re.compile(r"\s*,\s*then\s+|\s+then\s+|\s*,\s*", re.IGNORECASE)
_AND = re.compile(r"\s+and\s+", re.IGNORECASE)


def _lit_at(text: str, piece: str, start: int) -> Literal:
    try:
        return parse_literal(piece)
    except ParseError as exc:
        exc.offset += _byte_offset(text, start)
        exc.text = text
        raise


def parse_rule(text: str) -> Rule:
    if not text or not text.strip():
        raise ParseError("empty rule", text, 0, "a rule")
    body = text.strip().rstrip(".")
    if "->" in body:
        left, _, right = body.partition("->")
        if not left.strip():
            raise ParseError("empty antecedent", text, 0, "antecedent literal")
        ants, pos = [], 0
        for piece in left.split("&"):
            if not piece.strip():
                raise ParseError("empty conjunct", text, _byte_offset(text, pos), "literal")
            ants.append(_lit_at(text, piece, pos))
            pos += len(piece) + 1
        if not right.strip():
            raise ParseError("empty consequent", text, _byte_offset(text, len(body)), "consequent literal")
        cons = _lit_at(text, right, len(left) + 2)
    else:
        m = _IF.match(body)
        if not m:
            raise ParseError("rule must start with 'If' or use '->'", text, 0, "'If'")
        rest_at = m.end()
        rest = body[rest_at:]
        if re.match(r"^\s*(then\b|,)", rest, re.IGNORECASE) or not rest.strip():
            raise ParseError("empty antecedent", text, _byte_offset(text, rest_at), "antecedent literal")
        sep = _THEN.search(rest)
        if not sep:
            raise ParseError("missing consequent", text, _byte_offset(text, len(body)), "'then' or ','")
        left, right = rest[:sep.start()], rest[sep.end():]
        if not right.strip():
            raise ParseError("empty consequent", text, _byte_offset(text, len(body)), "consequent literal")
        ants, pos = [], rest_at
        for piece in _AND.split(left):
            ants.append(_lit_at(text, piece, pos))
            pos += len(piece) + 5
        cons = _lit_at(text, right, rest_at + sep.end())
    try:
        return Rule(tuple(ants), cons, text=text.strip())
    except MalformedRule as exc:
        raise ParseError(str(exc), text, 0, "a non-degenerate rule") from None


# --- serialization -----------------------------------------------------------

def serialize_literal(l: Literal) -> str:
    return ("" if l.positive else "!") + f"{l.atom.predicate}({l.atom.subject})"


def serialize_rule(r: Rule) -> str:
    return " & ".join(map(serialize_literal, r.antecedents)) + " -> " + serialize_literal(r.consequent)


# --- natural-language rendering ----------------------------------------------

def _subject_phrase(atom: Atom) -> str:
    words = atom.subject.replace("_", " ")
    return words if atom.subject[0].isupper() else "the " + words


def verbalize_literal(l: Literal, sentence: bool = False) -> str:
    atom = l.atom
    words = atom.predicate.split("_")
    copular = atom.copular if atom.copular is not None else not looks_inflected(words[0])
    subj = _subject_phrase(atom)
    if copular:
        out = f"{subj} is {'' if l.positive else 'not '}{' '.join(words)}"
    elif l.positive:
        out = f"{subj} {' '.join(words)}"
    else:
        out = f"{subj} does not {' '.join([base_form(words[0])] + words[1:])}"
    if sentence:
        out = out[0].upper() + out[1:] + "."
    return out


def verbalize_rule(r: Rule) -> str:
    ants = " and ".join(verbalize_literal(a) for a in r.antecedents)
    return f"If {ants}, {verbalize_literal(r.consequent)}."


def rule_text(r: Rule) -> str:
    """Surface text for prompts: the original wording if known, else a rendering."""
    return r.text if r.text else verbalize_rule(r)


# --- problem instances -------------------------------------------------------

@dataclass(frozen=True)
class ProblemInstance:
    """One dataset record.

    ``raw`` keeps the original strings (keys ``facts``, ``rules``,
    ``question``) so prompts can show natural text.  For math-proof records
    only ``gold_answer`` is structured and ``question`` is None.
    """

    id: str
    task: str
    facts: tuple[Literal, ...]
    rules: RuleSet
    question: Optional[Literal]
    gold_answer: Answer
    gold_depth: Optional[int] = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def factual(self) -> bool:
        return self.task == "factual"

    def fact_texts(self) -> list[str]:
        texts = self.raw.get("facts")
        if texts is not None and len(texts) == len(self.facts):
            return list(texts)
        return [verbalize_literal(f, sentence=True) for f in self.facts]

    def rule_texts(self) -> list[str]:
        return [rule_text(r) for r in self.rules]

    def question_text(self) -> str:
        if self.raw.get("question"):
            return self.raw["question"]
        return verbalize_literal(self.question, sentence=True)

    def with_rules(self, rules: RuleSet) -> "ProblemInstance":
        raw = dict(self.raw)
        raw["rules"] = [rule_text(r) for r in rules]
        return replace(self, rules=rules, raw=raw)


def instance_from_record(rec: dict, line: int = 0) -> ProblemInstance:
    if not isinstance(rec, dict):
        raise SchemaError(line, "<record>", "expected a JSON object")
    for key in ("id", "task", "question", "answer"):
        if key not in rec:
            raise SchemaError(line, key, "missing")
    if not isinstance(rec["id"], str) or not rec["id"]:
        raise SchemaError(line, "id", "must be a non-empty string")
    task = rec["task"]
    if task not in TASKS:
        raise SchemaError(line, "task", f"must be one of {TASKS}")
    try:
        gold = Answer.parse(rec["answer"]) if isinstance(rec["answer"], str) else None
    except ValueError:
        gold = None
    if gold is None or rec["answer"] != gold.value:
        raise SchemaError(line, "answer", "must be True/False/Unknown")
    depth = rec.get("depth")
    if depth is not None and (not isinstance(depth, int) or isinstance(depth, bool) or depth < 0):
        raise SchemaError(line, "depth", "must be a non-negative integer")
    facts_raw = rec.get("facts", [])
    rules_raw = rec.get("rules", [])
    for key, val in (("facts", facts_raw), ("rules", rules_raw)):
        if not isinstance(val, list) or not all(isinstance(s, str) for s in val):
            raise SchemaError(line, key, "must be an array of strings")
    if not isinstance(rec["question"], str) or not rec["question"].strip():
        raise SchemaError(line, "question", "must be a non-empty string")
    raw = {"facts": list(facts_raw), "rules": list(rules_raw), "question": rec["question"]}

    if task == "math-proof":
        return ProblemInstance(rec["id"], task, (), RuleSet(), None, gold, depth, raw)
    try:
        facts = tuple(parse_literal(s) for s in facts_raw)
        rules = RuleSet(parse_rule(s) for s in rules_raw)
        question = parse_literal(rec["question"])
    except ParseError as exc:
        exc.line = line
        raise
    return ProblemInstance(rec["id"], task, facts, rules, question, gold, depth, raw)


def instance_to_record(inst: ProblemInstance) -> dict:
    rec = {"id": inst.id, "task": inst.task}
    if inst.factual:
        rec["facts"] = inst.fact_texts()
        rec["rules"] = inst.rule_texts()
        rec["question"] = inst.question_text()
    else:
        rec["facts"] = list(inst.raw.get("facts", []))
        rec["rules"] = list(inst.raw.get("rules", []))
        rec["question"] = inst.raw.get("question", "")
    rec["answer"] = inst.gold_answer.value
    if inst.gold_depth is not None:
        rec["depth"] = inst.gold_depth
    return rec


def serialize(x: Union[Literal, Rule, ProblemInstance]) -> str:
    if isinstance(x, Literal):
        return serialize_literal(x)
    if isinstance(x, Rule):
        return serialize_rule(x)
    if isinstance(x, ProblemInstance):
        rec = instance_to_record(x)
        if x.factual:
            rec["facts"] = [serialize_literal(f) for f in x.facts]
            rec["rules"] = [serialize_rule(r) for r in x.rules]
            rec["question"] = serialize_literal(x.question)
        return json.dumps(rec, ensure_ascii=False)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def parse_instance(text: str) -> ProblemInstance:
    return instance_from_record(json.loads(text))


def iter_records(path: Union[str, Path]):
    """Yield ``(line_number, record)`` for the non-blank lines of a JSONL file."""
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield n, json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(n, "<record>", f"invalid JSON: {exc.msg}") from None


def load_dataset(path: Union[str, Path]) -> list[ProblemInstance]:
    out, seen = [], set()
    for n, rec in iter_records(path):
        inst = instance_from_record(rec, n)
        if inst.id in seen:
            raise SchemaError(n, "id", f"duplicate id {inst.id!r}")
        seen.add(inst.id)
        out.append(inst)
    return out


def write_dataset(instances, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(instance_to_record(inst), ensure_ascii=False) + "\n")
