from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dirreason.aggregate import (
    FALLBACK,
    LLM_ARBITRATED,
    MAJORITY,
    UNRESOLVED,
    Ballot,
    EmptyBallot,
    VoteTally,
    combine_dir,
    resolve,
    vote,
)
from dirreason.client import Completion, Fault, LLMClient, MockBackend, SamplingConfig
from dirreason.prompts import extract_answer, render_few_shot_dr, render_few_shot_ir
from dirreason.reasoner import Answer

from .golden_cases import WEATHER

T, F, U = Answer.TRUE, Answer.FALSE, Answer.UNKNOWN
answers_st = st.lists(st.sampled_from([T, F, U]), min_size=1, max_size=12)


class TestVote:
    def test_worked_ballot(self):
        t = vote([T, T, F, T, U])
        assert t.selected is T and t.probability == Fraction(3, 5) and t.resolution == MAJORITY

    def test_singleton(self):
        t = vote([T])
        assert t.selected is T and t.probability == 1

    def test_tie(self):
        t = vote([T, F])
        assert t.resolution == UNRESOLVED and t.selected is None
        assert t.tied == [T, F]

    def test_empty(self):
        with pytest.raises(EmptyBallot):
            vote([])

    def test_abstentions_do_not_count_in_m(self):
        t = vote([T, T, F], abstentions=2)
        assert t.m == 3 and t.probability == Fraction(2, 3) and t.abstentions == 2

    def test_tuple_ballots(self):
        t = vote([(T, "DR", "DR#0"), (T, "IR")])
        assert t.candidates[0] == Ballot(T, "DR", "DR#0")

    @given(answers_st, st.randoms())
    def test_permutation_invariance(self, answers, rnd):
        shuffled = list(answers)
        rnd.shuffle(shuffled)
        a, b = vote(answers), vote(shuffled)
        assert a.counts == b.counts
        assert a.resolution == b.resolution
        if a.resolution == MAJORITY:
            assert a.selected is b.selected

    @given(answers_st)
    def test_probability_and_ties_exact(self, answers):
        t = vote(answers)
        counts = Counter(answers)
        top = max(counts.values())
        assert sum(t.counts.values()) == t.m == len(answers)
        assert 0 <= t.probability <= 1
        if t.resolved:
            assert t.probability == Fraction(counts[t.selected], len(answers))
            assert counts[t.selected] == top
        unresolved = sum(1 for c in counts.values() if c == top) > 1
        assert (t.resolution == UNRESOLVED) == unresolved


class TestCombineDIR:
    def test_pooled(self):
        t = combine_dir([T, T, T], [T, T, F])
        assert t.selected is T and t.probability == Fraction(5, 6)
        assert {b.source for b in t.candidates} == {"DR", "IR"}

    @pytest.mark.parametrize("dr,ir", [([U], [T]), ([F, F], [T, T])])
    def test_ties(self, dr, ir):
        assert combine_dir(dr, ir).resolution == UNRESOLVED

    def test_empty_path(self):
        with pytest.raises(EmptyBallot):
            combine_dir([], [T])

    def test_sources_overridden(self):
        t = combine_dir([Ballot(T, "IR", "x")], [Ballot(F, "DR", "y")])
        assert [b.source for b in t.candidates] == ["DR", "IR"]


class RecordingClient:
    def __init__(self, reply):
        self.reply = reply
        self.prompts = []

    def complete(self, prompt, cfg):
        self.prompts.append(prompt)
        return Completion(self.reply, "mock")


class TestResolve:
    OUTPUTS = {"DR#0": "Step.\nAnswer: False", "IR#0": "Other step.\nAnswer: True"}

    def tally(self):
        return vote([Ballot(F, "DR", "DR#0"), Ballot(T, "IR", "IR#0")])

    def test_deterministic(self):
        t = resolve(self.tally(), "deterministic")
        assert t.selected is U and t.resolution == FALLBACK and t.probability == 0

    def test_llm_picks(self):
        client = RecordingClient("Reasoning 2 is better.\nAnswer: True")
        t = resolve(self.tally(), "llm", client, SamplingConfig(), self.OUTPUTS)
        assert t.selected is T and t.resolution == LLM_ARBITRATED
        assert t.probability == Fraction(1, 2)
        assert "# Reasoning 1:\nOther step." in client.prompts[0].body

    def test_llm_unparseable_falls_back(self):
        t = resolve(self.tally(), "llm", RecordingClient("hmm"), SamplingConfig(), self.OUTPUTS)
        assert t.selected is U and t.resolution == FALLBACK

    def test_llm_off_ballot_answer_falls_back(self):
        t = resolve(self.tally(), "llm", RecordingClient("Answer: Unknown"), SamplingConfig(), self.OUTPUTS)
        assert t.resolution == FALLBACK

    def test_idempotent_on_resolved(self):
        t = vote([T, T, F])
        assert resolve(t, "llm") is t
        r = resolve(self.tally(), "deterministic")
        assert resolve(r, "deterministic") is r

    @pytest.mark.parametrize("flip_path,expected", [("DR", T), ("IR", U)])
    def test_mock_arbiter_prefers_checkable_trace(self, exemplars, flip_path, expected):
        cfg = SamplingConfig()

        def sample(render, path, **kw):
            faults = [Fault("flip")] if path == flip_path else []
            return MockBackend(faults=faults, **kw).send(render(WEATHER, exemplars), cfg).text

        # DR sees the contrapositive only in the first case, so both paths would say True unflipped.
        dr = sample(render_few_shot_dr, "DR", use_contrapositives=flip_path == "DR")
        ir = sample(render_few_shot_ir, "IR")
        outputs = {"DR#0": dr, "IR#0": ir}
        split = vote([Ballot(extract_answer(dr)[0], "DR", "DR#0"), Ballot(extract_answer(ir)[0], "IR", "IR#0")])
        assert not split.resolved
        t = resolve(split, "llm", LLMClient(MockBackend()), cfg, outputs, WEATHER)
        assert t.resolution == LLM_ARBITRATED and t.selected is expected


def test_tally_dict_round_trip():
    t = resolve(vote([Ballot(T, "DR", "a"), Ballot(F, "IR", "b")]), "deterministic")
    assert VoteTally.from_dict(t.to_dict()) == t
