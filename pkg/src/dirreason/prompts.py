"""Prompt rendering and completion parsing.

Every renderer is a pure function of its inputs.  The trace block that
models may append (and that the mock backend always writes) looks like::

    TRACE:
    mode contradiction
    assume fine(weather)
    derive drives_to_work(Bob) via r1
    contradiction drives_to_work(Bob) !drives_to_work(Bob)
    verdict True
    END TRACE
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .logic import Rule
from .parsing import (
    ParseError,
    ProblemInstance,
    instance_from_record,
    iter_records,
    parse_literal,
    parse_rule,
    serialize_literal,
    verbalize_literal,
)
from .reasoner import (
    Answer,
    Mode,
    ProofTrace,
    Step,
    direct_answer,
    indirect_answer,
    KnowledgeBase,
)


class PromptKind(str, enum.Enum):
    RULE_AUGMENTATION = "rule-augmentation"
    ZERO_SHOT_IR = "zero-shot-ir"
    FEW_SHOT_IR = "few-shot-ir"
    ZERO_SHOT_DR = "zero-shot-dr"
    FEW_SHOT_DR = "few-shot-dr"
    CONFLICT_RESOLUTION = "conflict-resolution"

    def __str__(self):
        return self.value


class EmptyInput(ValueError):
    pass


class DiversityViolation(ValueError):
    pass


class NoConflict(ValueError):
    pass


class Unparseable(ValueError):
    """No answer marker in a completion; scored as an abstention."""


@dataclass(frozen=True)
class PromptText:
    body: str
    kind: PromptKind
    exemplar_ids: tuple[str, ...] = ()
    # Side-channel for offline backends (instance id, gold depth...); never sent.
    meta: dict = field(default_factory=dict, compare=False, repr=False)


DEFAULT_AUGMENTATION_EXEMPLARS = (
    ("If the cat is big, the cat is red.", "If the cat is not red, the cat is not big."),
    ("If Anne is kind and Anne is young, Anne is nice.",
     "If Anne is not nice and Anne is young, Anne is not kind. "
     "If Anne is not nice and Anne is kind, Anne is not young."),
)

CONTRADICTION_FOUND = "contradiction-found"
NO_CONTRADICTION = "no-contradiction"


@dataclass(frozen=True)
class Exemplar:
    id: str
    facts: tuple[str, ...]
    rules: tuple[str, ...]
    question: str
    worked_answer: str
    label: str
    answer: Answer

    def instance(self) -> ProblemInstance:
        rec = {"id": self.id, "task": "factual", "facts": list(self.facts),
               "rules": list(self.rules), "question": self.question, "answer": self.answer.value}
        return instance_from_record(rec)


def load_exemplars(path: Union[str, Path]) -> list[Exemplar]:
    out = []
    for n, rec in iter_records(path):
        inst = instance_from_record(rec, n)
        label = rec.get("label")
        if label not in (CONTRADICTION_FOUND, NO_CONTRADICTION):
            raise ValueError(f"line {n}: bad exemplar label {label!r}")
        if not rec.get("worked_answer"):
            raise ValueError(f"line {n}: missing worked_answer")
        out.append(Exemplar(inst.id, tuple(rec.get("facts", [])), tuple(rec.get("rules", [])),
                            rec["question"], rec["worked_answer"], label, inst.gold_answer))
    return out


def select_exemplars(pool: Sequence[Exemplar], ids: Optional[Iterable[str]]) -> list[Exemplar]:
    if ids is None:
        return list(pool)
    by_id = {e.id: e for e in pool}
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise KeyError(f"unknown exemplar ids: {missing}")
    return [by_id[i] for i in ids]


# --- templates ---------------------------------------------------------------

RULE_AUG_INSTRUCTION = (
    "# <Instruction>The contrapositive is equivalent to the original rule, and now we need to "
    "convert the following rules into their contrapositives.</Instruction>"
)

ZERO_SHOT_IR_STEPS = (
    "(Instructions)\n"
    "# Step 1: List the conditions and questions in the original proposition.\n"
    "# Step 2: Merge the conditions listed in step 1 into one. Define it as wj.\n"
    "# Step 3: Let us think it step by step. Please consider all possibilities. If the "
    "intersection between wj (defined in step 2) and the negation of the question is not empty "
    "at least in one possibility, the original proposition is false. Otherwise, the original "
    "proposition is true."
)

ZERO_SHOT_DR_STEPS = (
    "(Instructions)\n"
    "# Let us think it step by step. Start from the conditions of the original proposition and "
    "derive its conclusion directly. State at the end whether the original proposition is true "
    "or false."
)

IR_INSTRUCTION = (
    "# <Instruction> Proof by contradiction is a proof that determines the truth of a question "
    "by assuming the proposition is false, then working to show its falsity until the result of "
    "that assumption is a contradiction. </Instruction>"
)

DR_INSTRUCTION = (
    "# <Instruction> Answer the question by reasoning forward from the facts and rules, one "
    "step at a time, until the question or its negation is reached. If neither can be "
    "reached, the answer is Unknown. </Instruction>"
)

TRACE_INSTRUCTION = (
    "# <Format> After the reasoning, write a block that starts with the line TRACE: and ends "
    "with the line END TRACE. Inside it write one item per line, with literals written as "
    "predicate(subject) and a leading ! for negation: 'mode direct' or 'mode contradiction', "
    "'assume <literal>', 'derive <literal> via <rule id or fact>', 'contradiction <literal> "
    "<literal>', and 'verdict True|False|Unknown'. Finish with the line 'Answer: True', "
    "'Answer: False' or 'Answer: Unknown'. </Format>"
)

CONFLICT_INSTRUCTION = (
    "# <Instruction> The following reasoning processes answer the same question but reach "
    "different answers. Check every step of each reasoning against the given facts and rules, "
    "then decide which reasoning is more reliable. </Instruction>"
)

CONFLICT_QUESTION = (
    "# Which reasoning is more reliable? Give its number, then its final answer as "
    "'Answer: True', 'Answer: False' or 'Answer: Unknown'."
)


def _sentence(text: str) -> str:
    text = text.strip()
    return text if text.endswith((".", "?", "!")) else text + "."


def _facts_line(facts: Sequence[str]) -> str:
    return "# Facts: " + (" ".join(_sentence(f) for f in facts) if facts else "None.")


def _rules_line(rules: Sequence[str], ids: Optional[Sequence[str]] = None) -> str:
    if not rules:
        return "# Rules: None."
    if ids:
        items = [f"{rid}: {_sentence(r)}" for rid, r in zip(ids, rules)]
    else:
        items = [_sentence(r) for r in rules]
    return "# Rules: " + " ".join(items)


def _instance_block(inst: ProblemInstance, with_ids: bool) -> list[str]:
    ids = [r.rid for r in inst.rules] if with_ids else None
    return [
        _facts_line(inst.fact_texts()),
        _rules_line(inst.rule_texts(), ids),
        "# Question: " + _sentence(inst.question_text()),
    ]


def render_rule_augmentation(rules: Sequence[str], exemplars: Sequence[tuple[str, str]]) -> PromptText:
    if not rules:
        raise EmptyInput("no rules to contrapose")
    if not exemplars:
        raise EmptyInput("at least one (rule, contrapositive) exemplar is required")
    lines = [RULE_AUG_INSTRUCTION]
    for n, (rule, contra) in enumerate(exemplars, start=1):
        lines += [f"# Example {n}", f"# Rule: {rule}", f"# Contrapositive: {contra}"]
    lines.append("# Rules:")
    lines += [f"{n}. {r}" for n, r in enumerate(rules, start=1)]
    lines.append("# Contrapositives:")
    return PromptText("\n".join(lines), PromptKind.RULE_AUGMENTATION)


def render_zero_shot_ir(question: str) -> PromptText:
    if not question or not question.strip():
        raise EmptyInput("empty question")
    body = f"# Question: {question.strip()}\n{ZERO_SHOT_IR_STEPS}\n# Answer:"
    return PromptText(body, PromptKind.ZERO_SHOT_IR)


def render_zero_shot_dr(question: str) -> PromptText:
    if not question or not question.strip():
        raise EmptyInput("empty question")
    body = f"# Question: {question.strip()}\n{ZERO_SHOT_DR_STEPS}\n# Answer:"
    return PromptText(body, PromptKind.ZERO_SHOT_DR)


def check_diversity(exemplars: Sequence[Exemplar]) -> None:
    labels = {e.label for e in exemplars}
    if labels != {CONTRADICTION_FOUND, NO_CONTRADICTION}:
        raise DiversityViolation(
            f"exemplars need both {CONTRADICTION_FOUND!r} and {NO_CONTRADICTION!r}; got {sorted(labels)}")


def _few_shot(instance: ProblemInstance, exemplars: Sequence[Exemplar], kind: PromptKind,
              structured_trace: bool) -> PromptText:
    if not exemplars:
        raise EmptyInput("no exemplars")
    if instance.question is None:
        raise EmptyInput("few-shot prompts need a factual instance")
    check_diversity(exemplars)
    indirect = kind is PromptKind.FEW_SHOT_IR
    lines = [IR_INSTRUCTION if indirect else DR_INSTRUCTION]
    if structured_trace:
        lines.append(TRACE_INSTRUCTION)
    for n, ex in enumerate(exemplars, start=1):
        ex_inst = ex.instance()
        lines.append(f"# Example {n}")
        lines += _instance_block(ex_inst, structured_trace)
        kb = KnowledgeBase(ex_inst.facts, ex_inst.rules)
        if indirect:
            answer = "# Answer: " + ex.worked_answer.strip()
            _, trace = indirect_answer(kb, ex_inst.question)
        else:
            _, trace = direct_answer(kb, ex_inst.question)
            answer = "# Answer: " + direct_explanation(ex_inst, trace)
        lines.append(answer)
        if structured_trace:
            lines.append(format_trace(trace))
            lines.append(f"Answer: {trace.verdict}")
    lines += _instance_block(instance, structured_trace)
    lines.append("# Answer:")
    return PromptText("\n".join(lines), kind, tuple(e.id for e in exemplars))


def render_few_shot_ir(instance: ProblemInstance, exemplars: Sequence[Exemplar],
                       structured_trace: bool = True) -> PromptText:
    return _few_shot(instance, exemplars, PromptKind.FEW_SHOT_IR, structured_trace)


def render_few_shot_dr(instance: ProblemInstance, exemplars: Sequence[Exemplar],
                       structured_trace: bool = True) -> PromptText:
    return _few_shot(instance, exemplars, PromptKind.FEW_SHOT_DR, structured_trace)


def render_conflict_resolution(outputs: Sequence[str], context: Optional[ProblemInstance] = None) -> PromptText:
    if len(outputs) < 2:
        raise EmptyInput("conflict resolution needs at least two outputs")
    answers = set()
    for text in outputs:
        try:
            answers.add(extract_answer(text)[0])
        except Unparseable:
            pass
    if len(answers) < 2:
        raise NoConflict("the outputs do not disagree")
    lines = [CONFLICT_INSTRUCTION]
    if context is not None and context.factual:
        lines += _instance_block(context, True)
    elif context is not None:
        lines.append("# Question: " + context.question_text())
    for n, text in enumerate(outputs, start=1):
        lines += [f"# Reasoning {n}:", text.strip()]
    lines += [CONFLICT_QUESTION, "# Answer:"]
    return PromptText("\n".join(lines), PromptKind.CONFLICT_RESOLUTION)


# --- natural-language explanations (exemplars and the mock backend) ----------

def _quote(l) -> str:
    return f"'{verbalize_literal(l)}'"


def direct_explanation(inst: ProblemInstance, trace: ProofTrace) -> str:
    parts = []
    for step in trace.steps:
        if step.via == "fact":
            parts.append(f"We know the fact {_quote(step.literal)}.")
        else:
            parts.append(f"By rule {step.via}, {verbalize_literal(step.literal)}.")
    q = _quote(inst.question)
    if trace.verdict is Answer.TRUE:
        parts.append(f"So the statement {q} is True.")
    elif trace.verdict is Answer.FALSE:
        parts.append(f"This is the negation of {q}, so the statement is False.")
    else:
        parts.append(f"Neither {q} nor its negation follows from the facts and rules, so the answer is Unknown.")
    return " ".join(parts)


def indirect_explanation(inst: ProblemInstance, trace: ProofTrace, kb: KnowledgeBase) -> str:
    q = inst.question
    if trace.verdict is Answer.UNKNOWN:
        return (f"The negation of the original question is {_quote(-q)}. Assuming {_quote(-q)} is true, "
                f"no contradiction with the facts or rules can be derived. Assuming {_quote(q)} is true, "
                "no contradiction can be derived either. So the truth of the question cannot be proven: Unknown.")
    assumed = trace.assumption
    parts = []
    if trace.verdict is Answer.TRUE:
        parts.append(f"The negation of the original question is {_quote(assumed)}.")
    else:
        parts.append(f"Assume the original question {_quote(assumed)} holds; its negative statement is {_quote(-assumed)}.")
    parts.append(f"Assuming {_quote(assumed)} is true,")
    for step in trace.steps:
        parts.append(f"by rule {step.via}, {verbalize_literal(step.literal)},")
    new, old = trace.contradiction_pair
    if old == assumed:
        against = "assumption"
    elif old in kb.facts:
        against = "fact"
    else:
        against = "derived statement"
    parts.append(f"which conflicts with the {against} {_quote(old)}.")
    if trace.verdict is Answer.TRUE:
        parts.append(f"So {_quote(assumed)} is false and the original question {_quote(q)} is True.")
    else:
        parts.append(f"So the original question {_quote(q)} is False.")
    return " ".join(parts)


# --- trace wire format -------------------------------------------------------

def format_trace(trace: ProofTrace) -> str:
    lines = ["TRACE:", f"mode {trace.mode}"]
    if trace.assumption is not None:
        lines.append(f"assume {serialize_literal(trace.assumption)}")
    for step in trace.steps:
        lines.append(f"derive {serialize_literal(step.literal)} via {step.via}")
    if trace.contradiction_pair is not None:
        a, b = trace.contradiction_pair
        lines.append(f"contradiction {serialize_literal(a)} {serialize_literal(b)}")
    lines.append(f"verdict {trace.verdict}")
    lines.append("END TRACE")
    return "\n".join(lines)


_TRACE_BLOCK = re.compile(r"^[ \t]*TRACE:[ \t]*\n(.*?)^[ \t]*(?:END TRACE|```)[ \t]*$",
                          re.MULTILINE | re.DOTALL)
_TRACE_LINE = re.compile(
    r"^(?:mode\s+(?P<mode>direct|contradiction)"
    r"|assume\s+(?P<assume>\S+)"
    r"|derive\s+(?P<lit>\S+)\s+via\s+(?P<via>[\w.\-]+)"
    r"|contradiction\s+(?P<a>\S+)\s+(?P<b>\S+)"
    r"|verdict\s+(?P<verdict>true|false|unknown))$",
    re.IGNORECASE,
)


def parse_trace(text: str) -> Optional[ProofTrace]:
    """The last well-formed TRACE block in ``text``, or None."""
    blocks = list(_TRACE_BLOCK.finditer(text))
    if not blocks:
        return None
    mode = assumption = pair = verdict = None
    steps = []
    try:
        for raw in blocks[-1].group(1).splitlines():
            line = raw.strip()
            if not line or line.startswith("```"):
                continue
            m = _TRACE_LINE.match(line)
            if not m:
                return None
            if m["mode"]:
                mode = Mode(m["mode"].lower())
            elif m["assume"]:
                assumption = parse_literal(m["assume"])
            elif m["lit"]:
                steps.append(Step(parse_literal(m["lit"]), m["via"]))
            elif m["a"]:
                pair = (parse_literal(m["a"]), parse_literal(m["b"]))
            else:
                verdict = Answer.parse(m["verdict"])
    except (ParseError, ValueError):
        return None
    if verdict is None:
        return None
    if mode is None:
        mode = Mode.CONTRADICTION if assumption is not None else Mode.DIRECT
    return ProofTrace(mode, tuple(steps), verdict, assumption, pair)


_ANSWER_MARKERS = [
    re.compile(r"\banswer\b\s*(?:is\s*)?[:：]?\s*[*\"'`]*\s*(true|false|unknown)\b", re.IGNORECASE),
    re.compile(r"\bthe original (?:proposition|question|statement) is (true|false|unknown)\b", re.IGNORECASE),
]
_BARE = re.compile(r"\b(true|false|unknown)\b", re.IGNORECASE)


def extract_answer(completion: str) -> tuple[Answer, Optional[ProofTrace]]:
    """Last answer marker wins.  Raises :class:`Unparseable` when none is found."""
    trace = parse_trace(completion)
    text = _TRACE_BLOCK.sub("", completion)
    best = None
    for pat in _ANSWER_MARKERS:
        for m in pat.finditer(text):
            if best is None or m.start(1) > best[0]:
                best = (m.start(1), m.group(1))
    lines = [l for l in text.splitlines() if l.strip()]
    if lines:
        last = lines[-1]
        tokens = {t.lower() for t in _BARE.findall(last)}
        if len(tokens) == 1:
            m = list(_BARE.finditer(last))[-1]
            pos = text.rstrip().rfind(last) + m.start(1)
            if best is None or pos > best[0]:
                best = (pos, m.group(1))
    if best is None:
        raise Unparseable("no answer marker found")
    return Answer.parse(best[1]), trace


_LIST_PREFIX = re.compile(r"^\s*(?:#\s*)?(?:contrapositives?\s*:\s*)?(?:\d+[.)]\s*|[-*•]\s*)?", re.IGNORECASE)


def extract_contrapositives(completion: str) -> tuple[list[Rule], int]:
    """Parse every rule-looking sentence; returns (rules, number dropped)."""
    rules, dropped = [], 0
    for line in completion.splitlines():
        line = _LIST_PREFIX.sub("", line, count=1).strip()
        if not line:
            continue
        for sentence in re.split(r"(?<=\.)\s+", line):
            sentence = sentence.strip()
            if not sentence:
                continue
            try:
                rule = parse_rule(sentence)
            except ParseError:
                dropped += 1
                continue
            rules.append(Rule(rule.antecedents, rule.consequent, source="llm", text=rule.text))
    return rules, dropped


# --- reading an instance back out of a rendered prompt -----------------------

_RULE_ID = re.compile(r"^([A-Za-z][\w.\-]*):\s+")


def _sentences(text: str) -> list[str]:
    text = text.strip()
    if text in ("", "None."):
        return []
    return [s.strip() for s in re.split(r"(?<=\.)\s+", text) if s.strip()]


def embedded_instance(body: str) -> Optional[tuple[list, list[Rule], object]]:
    """Facts, rules and question of the last instance block in a prompt body.

    Rules keep the ids shown in the prompt when present.  Returns None when
    the body has no parseable instance block.
    """
    facts_at = body.rfind("\n# Facts: ")
    if facts_at < 0:
        return None
    lines = body[facts_at + 1:].splitlines()
    try:
        facts_line, rules_line, q_line = lines[0], lines[1], lines[2]
        if not (rules_line.startswith("# Rules: ") and q_line.startswith("# Question: ")):
            return None
        facts = [parse_literal(s) for s in _sentences(facts_line[len("# Facts: "):])]
        rules = []
        for s in _sentences(rules_line[len("# Rules: "):]):
            m = _RULE_ID.match(s)
            rid = ""
            if m:
                rid, s = m.group(1), s[m.end():]
            r = parse_rule(s)
            rules.append(Rule(r.antecedents, r.consequent, rid=rid, text=r.text))
        question = parse_literal(q_line[len("# Question: "):].rstrip("?"))
    except (IndexError, ParseError, ValueError):
        return None
    return facts, rules, question


def augmentation_targets(body: str) -> list[str]:
    """Rule strings listed under ``# Rules:`` in a rule-augmentation prompt."""
    start = body.rfind("\n# Rules:\n")
    end = body.rfind("\n# Contrapositives:")
    if start < 0 or end < start:
        return []
    return [_LIST_PREFIX.sub("", l, count=1).strip()
            for l in body[start + len("\n# Rules:\n"):end].splitlines() if l.strip()]
