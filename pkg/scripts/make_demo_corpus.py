"""Regenerate src/dirreason/data/demo.jsonl.

Each instance is built from a templated reasoning shape at a chosen depth,
rendered in the controlled grammar, and its gold answer is taken from the
truth-table oracle (the script aborts if a shape's intended answer disagrees).

    python scripts/make_demo_corpus.py
"""

import json
import random
from pathlib import Path

from dirreason.logic import Atom, Literal, Rule
from dirreason.parsing import instance_from_record, verbalize_literal, verbalize_rule
from dirreason.reasoner import Answer, KnowledgeBase, model_check

OUT = Path(__file__).resolve().parents[1] / "src" / "dirreason" / "data" / "demo.jsonl"

ENTITIES = ["Bob", "Anne", "Charlie", "Dave", "Erin", "Fiona", "Gary", "Harry",
            "cat", "dog", "bear", "mouse", "rabbit", "tiger", "squirrel", "lion"]
ADJECTIVES = ["big", "red", "kind", "cold", "young", "nice", "rough", "round", "smart",
              "furry", "quiet", "green", "blue", "white", "happy", "strong", "small", "calm"]
VERBS = ["drives_to_work", "eats_the_mouse", "likes_the_cat", "visits_the_bear",
         "chases_the_rabbit", "needs_the_dog", "sees_the_tiger", "sleeps_outside",
         "reads_books", "plays_chess"]


class Vocab:
    def __init__(self, rng):
        self.rng = rng
        self.used = set()

    def atom(self):
        while True:
            subj = self.rng.choice(ENTITIES)
            if self.rng.random() < 0.3:
                pred, copular = self.rng.choice(VERBS), False
            else:
                pred, copular = self.rng.choice(ADJECTIVES), True
            a = Atom(subj, pred, copular)
            if a not in self.used:
                self.used.add(a)
                return Literal(a)


def chain(v, n):
    return [v.atom() for _ in range(n + 1)]


def rules_along(ps):
    return [Rule((a,), b) for a, b in zip(ps, ps[1:])]


def shape_forward_true(v, d):
    p = chain(v, d)
    return [p[0]], rules_along(p), p[-1], Answer.TRUE


def shape_forward_false(v, d):
    p = chain(v, d)
    rules = rules_along(p[:-1]) + [Rule((p[-2],), -p[-1])]
    return [p[0]], rules, p[-1], Answer.FALSE


def shape_contra_true(v, d):
    p = chain(v, d)
    return [-p[-1]], rules_along(p), -p[0], Answer.TRUE


def shape_contra_false(v, d):
    p = chain(v, d)
    return [-p[-1]], rules_along(p), p[0], Answer.FALSE


def _mid(v, d, final_negated):
    # One contrapositive step, then d-1 forward steps that need its result.
    a, c, y = v.atom(), v.atom(), v.atom()
    s = chain(v, d - 2)
    rules = [Rule((a,), c), Rule((-a, y), s[0])] + rules_along(s)
    if final_negated:
        tail = v.atom()
        rules.append(Rule((s[-1],), -tail))
        return [-c, y], rules, tail, Answer.FALSE
    return [-c, y], rules, s[-1], Answer.TRUE


def shape_mid_true(v, d):
    if d == 1:
        a, b, c = v.atom(), v.atom(), v.atom()
        return [a, b], [Rule((a, b), c)], c, Answer.TRUE
    return _mid(v, d, False)


def shape_mid_false(v, d):
    if d == 1:
        p = chain(v, 1)
        return [p[0]], [Rule((p[0],), -p[1])], p[1], Answer.FALSE
    if d == 2:
        a, c, tail = v.atom(), v.atom(), v.atom()
        return [-c], [Rule((a,), c), Rule((-a,), -tail)], tail, Answer.FALSE
    return _mid(v, d - 1, True)


def shape_unknown(v, d):
    p = chain(v, d)
    z = v.atom()
    return [p[0]], rules_along(p) + [Rule((z,), p[-1])], z, Answer.UNKNOWN


def shape_case_split(v, d, negated):
    # q follows from every combination of two conditions: true by cases only.
    a, b, q = v.atom(), v.atom(), v.atom()
    head = -q if negated else q
    rules = [Rule((x, y), head) for x in (a, -a) for y in (b, -b)]
    return [], rules, q, Answer.FALSE if negated else Answer.TRUE


def distractors(v, rng):
    facts, rules = [], []
    for _ in range(rng.randint(0, 2)):
        facts.append(v.atom() if rng.random() < 0.7 else -v.atom())
    for _ in range(rng.randint(0, 2)):
        a, b = v.atom(), v.atom()
        rules.append(Rule((a,), b if rng.random() < 0.7 else -b))
    return facts, rules


def record(iid, facts, rules, question, answer, depth):
    kb = KnowledgeBase(facts, rules)
    oracle = model_check(kb, question)
    assert oracle == answer, (iid, oracle, answer)
    rec = {
        "id": iid,
        "task": "factual",
        "facts": [verbalize_literal(f, sentence=True) for f in facts],
        "rules": [verbalize_rule(r) for r in rules],
        "question": verbalize_literal(question, sentence=True),
        "answer": answer.value,
        "depth": depth,
    }
    inst = instance_from_record(rec)
    assert list(inst.facts) == list(facts) and list(inst.rules) == list(rules), iid
    return rec


SHAPES = [
    ("fwd-true", shape_forward_true),
    ("fwd-false", shape_forward_false),
    ("contra-true", shape_contra_true),
    ("contra-false", shape_contra_false),
    ("mid-true", shape_mid_true),
    ("mid-false", shape_mid_false),
    ("unknown", shape_unknown),
]


def main():
    rng = random.Random(20240205)
    out = []
    for depth in range(1, 6):
        for name, shape in SHAPES:
            v = Vocab(rng)
            facts, rules, q, answer = shape(v, depth)
            dfacts, drules = distractors(v, rng)
            facts, rules = facts + dfacts, rules + drules
            rng.shuffle(facts)
            out.append(record(f"pw-{name}-d{depth}", facts, rules, q, answer, depth))
    for i, negated in enumerate((False, True)):
        v = Vocab(rng)
        facts, rules, q, answer = shape_case_split(v, 2, negated)
        out.append(record(f"pw-cases-{i + 1}", facts, rules, q, answer, 2))
    OUT.parent.mkdir(parents=True, exist_ok=True)
    with open(OUT, "w", encoding="utf-8") as fh:
        for rec in out:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    print(f"wrote {len(out)} records to {OUT}")


if __name__ == "__main__":
    main()
