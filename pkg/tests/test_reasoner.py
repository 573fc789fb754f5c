from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dirreason.logic import Atom, Rule, RuleSet, augment, lit
from dirreason.parsing import parse_literal, parse_rule
from dirreason.reasoner import (
    INCONSISTENT,
    Answer,
    InconsistentKB,
    KnowledgeBase,
    Mode,
    ProofTrace,
    Step,
    TooManyAtoms,
    check_trace,
    direct_answer,
    forward_closure,
    indirect_answer,
    model_check,
)

from .conftest import literals_st, rules_st
from .oracle import entailed_literals

A, B, C, D = (lit(p, "x") for p in "abcd")
SMALL = dict(subjects=["x"], predicates=["a", "b", "c", "d"])


def kb(facts=(), rules=()):
    return KnowledgeBase(facts, rules)


class TestKnowledgeBase:
    def test_complementary_facts_rejected(self):
        with pytest.raises(InconsistentKB) as info:
            kb([A, -A])
        assert set(info.value.pair) == {A, -A}

    def test_rules_coerced_to_ruleset(self):
        k = kb([A], [Rule((A,), B)])
        assert isinstance(k.rules, RuleSet)
        assert k.rules[0].rid == "r1"


class TestForwardClosure:
    def test_chain(self):
        c = forward_closure(kb([A], [Rule((A,), B), Rule((B,), C)]))
        assert c.literals == {A, B, C}
        assert c.steps == [Step(B, "r1"), Step(C, "r2")]

    def test_nothing_applies(self):
        c = forward_closure(kb([A], [Rule((B,), C)]))
        assert c.literals == {A} and c.steps == [] and c.consistent

    def test_direct_clash(self):
        c = forward_closure(kb([A, -B], [Rule((A,), B)]))
        assert c.conflict == (B, -B)

    def test_assumption_clashing_with_fact(self):
        c = forward_closure(kb([A]), -A)
        assert c.conflict == (-A, A)


class TestDirectAnswer:
    def test_true(self):
        ans, trace = direct_answer(kb([A], [Rule((A,), B)]), B)
        assert ans is Answer.TRUE
        assert trace.steps == (Step(B, "r1"),) and trace.mode is Mode.DIRECT

    def test_false_from_fact(self):
        ans, trace = direct_answer(kb([-C]), C)
        assert ans is Answer.FALSE
        assert trace.steps == (Step(-C, "fact"),)

    def test_unknown(self):
        ans, trace = direct_answer(kb([A], [Rule((B,), C)]), C)
        assert ans is Answer.UNKNOWN and trace.steps == ()

    def test_pruned_to_support(self):
        k = kb([A, D], [Rule((D,), -B), Rule((A,), C)])
        _, trace = direct_answer(k, C)
        assert trace.steps == (Step(C, "r2"),)

    def test_inconsistent_closure(self):
        with pytest.raises(InconsistentKB):
            direct_answer(kb([A, -B], [Rule((A,), B)]), C)


class TestIndirectAnswer:
    def test_weather(self):
        fine = parse_literal("the weather is fine")
        drives = parse_literal("Bob drives to work")
        k = kb([-drives], [parse_rule("If the weather is fine, Bob drives to work")])
        ans, trace = indirect_answer(k, -fine)
        assert ans is Answer.TRUE
        assert trace.assumption == fine
        assert trace.steps == (Step(drives, "r1"),)
        assert trace.contradiction_pair == (drives, -drives)
        assert check_trace(k, trace)

    def test_forward_derivable(self):
        k = kb([A], [Rule((A,), B)])
        ans, trace = indirect_answer(k, B)
        assert ans is Answer.TRUE
        p, q = trace.contradiction_pair
        assert p == -q
        assert check_trace(k, trace)

    def test_false_by_second_phase(self):
        k = kb([-B], [Rule((A,), B)])
        ans, trace = indirect_answer(k, A)
        assert ans is Answer.FALSE and trace.assumption == A

    def test_unknown(self):
        ans, trace = indirect_answer(kb([], [Rule((A,), B)]), B)
        assert ans is Answer.UNKNOWN
        assert trace.contradiction_pair is None

    def test_inconsistent_before_assumption(self):
        with pytest.raises(InconsistentKB):
            indirect_answer(kb([A, -B], [Rule((A,), B)]), C)


class TestModelCheck:
    def test_examples(self):
        assert model_check(kb([A], [Rule((A,), B)]), B) is Answer.TRUE
        assert model_check(kb([A, B], [Rule((A, B), C)]), -C) is Answer.FALSE
        assert model_check(kb(), A) is Answer.UNKNOWN

    def test_no_model(self):
        assert model_check(kb([A], [Rule((A,), B), Rule((A,), -B)]), C) is INCONSISTENT

    def test_atom_cap(self):
        facts = [lit(f"p{i}", "x") for i in range(21)]
        with pytest.raises(TooManyAtoms):
            model_check(kb(facts), facts[0])

    def test_case_split_is_definite(self):
        rules = [Rule((x, y), C) for x in (A, -A) for y in (B, -B)]
        assert model_check(kb([], rules), C) is Answer.TRUE
        assert indirect_answer(kb([], rules), C)[0] is Answer.UNKNOWN

    @settings(max_examples=200, deadline=None)
    @given(st.lists(rules_st(max_antecedents=2, **SMALL), max_size=3),
           st.lists(literals_st(**SMALL), max_size=3, unique_by=lambda l: l.atom),
           literals_st(**SMALL))
    def test_agrees_with_independent_oracle(self, rules, facts, q):
        universe = {Atom("x", p) for p in "abcd"}
        expected = entailed_literals(facts, rules, universe)
        got = model_check(kb(facts, rules), q)
        if expected is None:
            assert got is INCONSISTENT
        elif (q.atom, q.positive) in expected:
            assert got is Answer.TRUE
        elif (q.atom, not q.positive) in expected:
            assert got is Answer.FALSE
        else:
            assert got is Answer.UNKNOWN


class TestCheckTrace:
    K = kb([-C], [Rule((A,), B), Rule((B,), C)])

    def test_unlicensed_step(self):
        k = kb([], [Rule((A,), B)])
        t = ProofTrace(Mode.DIRECT, (Step(B, "r1"),), Answer.TRUE, question=B)
        assert check_trace(k, t).reason == "unlicensed step"

    def test_pair_not_complementary(self):
        t = ProofTrace(Mode.CONTRADICTION, (Step(B, "r1"),), Answer.TRUE, -D, (B, C), D)
        assert check_trace(kb([A], [Rule((A,), B)]), t).reason == "pair not complementary"

    def test_unknown_rule(self):
        t = ProofTrace(Mode.DIRECT, (Step(B, "r9"),), Answer.TRUE, question=B)
        assert not check_trace(self.K, t)

    def test_verdict_must_match_assumption(self):
        _, t = indirect_answer(self.K, A)
        assert t.verdict is Answer.FALSE and check_trace(self.K, t)
        bad = replace(t, verdict=Answer.TRUE)
        assert check_trace(self.K, bad).reason == "assumption does not match verdict"

    def test_wrong_unknown(self):
        t = ProofTrace(Mode.DIRECT, (), Answer.UNKNOWN, question=B)
        assert not check_trace(kb([A], [Rule((A,), B)]), t)

    def test_question_required(self):
        t = ProofTrace(Mode.DIRECT, (), Answer.UNKNOWN)
        assert not check_trace(self.K, t)
        assert check_trace(kb(), t, question=A)

    def test_truthiness(self):
        assert bool(check_trace(kb([A]), ProofTrace(Mode.DIRECT, (Step(A, "fact"),), Answer.TRUE, question=A)))


@settings(max_examples=300, deadline=None)
@given(st.lists(rules_st(max_antecedents=2, **SMALL), max_size=4),
       st.lists(literals_st(**SMALL), max_size=3, unique_by=lambda l: l.atom),
       literals_st(**SMALL), st.booleans())
def test_soundness_and_trace_validity(rules, facts, q, aug):
    rs = augment(rules) if aug else RuleSet(rules)
    k = kb(facts, rs)
    oracle = model_check(k, q)
    if oracle is INCONSISTENT:
        return
    try:
        d, dt = direct_answer(k, q)
        i, it = indirect_answer(k, q)
    except InconsistentKB:
        pytest.fail("satisfiable KB rejected")
    for ans, trace in ((d, dt), (i, it)):
        if ans.definite:
            assert ans == oracle
        assert trace.verdict == ans
        assert check_trace(k, trace), check_trace(k, trace).reason
    if d.definite and i.definite:
        assert d == i
    if d.definite:
        assert i.definite  # a direct proof always yields a contradiction
