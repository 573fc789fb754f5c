from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dirreason.client import Fault, LLMClient, MockBackend, SamplingConfig
from dirreason.harness import (
    CORRECT,
    INCORRECT,
    UNGRADED,
    EmptyRun,
    EvalRecord,
    Metrics,
    MixedCell,
    PipelineConfig,
    RunFileError,
    compare_runs,
    compute_metrics,
    grade,
    load_run,
    pct,
    run_pipeline,
    write_run,
)
from dirreason.logic import augment
from dirreason.reasoner import Answer, KnowledgeBase, indirect_answer, model_check

from .golden_cases import WEATHER

T, F, U = Answer.TRUE, Answer.FALSE, Answer.UNKNOWN


def run(ds, exemplars, faults=(), **kw):
    client = LLMClient(MockBackend(seed=3, faults=faults))
    return run_pipeline(ds, PipelineConfig(**kw), client, exemplars)


def synthetic(n, an, pn, on, pipeline="DR"):
    """n records with an answer-correct, pn trace-correct, on of them both."""
    assert on <= min(an, pn) and an + pn - on <= n
    recs = []
    for i in range(n):
        a = i < an
        p = i < on or (an <= i < an + pn - on)
        recs.append(EvalRecord(f"i{i}", pipeline, False, T, T if a else F,
                               trace_status=CORRECT if p else INCORRECT, answer_correct=a))
    return recs


class TestGrade:
    def trace(self, verdict=T):
        _, t = indirect_answer(KnowledgeBase(WEATHER.facts, WEATHER.rules), WEATHER.question)
        return replace(t, verdict=verdict) if verdict is not t.verdict else t

    def test_correct(self):
        assert grade(WEATHER, T, self.trace()) == (True, CORRECT)

    def test_no_trace(self):
        assert grade(WEATHER, T, None) == (True, UNGRADED)

    def test_wrong_answer(self):
        assert grade(WEATHER, F, self.trace())[0] is False

    def test_trace_verdict_must_match_gold(self):
        assert grade(WEATHER, T, self.trace(F)) == (True, INCORRECT)

    def test_math_ungraded(self, proofmath):
        assert grade(proofmath[0], proofmath[0].gold_answer, self.trace())[1] == UNGRADED

    def test_failed(self):
        assert grade(WEATHER, None, None) == (False, UNGRADED)


class TestMetrics:
    def test_table_cell(self):
        m = compute_metrics(synthetic(150, 70, 13, 13))
        assert pct(m.AA) == "46.67%"
        assert pct(m.AP) == "8.67%"
        assert pct(m.OA) == "8.67%"

    def test_all_correct(self):
        m = compute_metrics(synthetic(4, 4, 4, 4))
        assert m.AA == m.AP == m.OA == 1

    def test_empty(self):
        with pytest.raises(EmptyRun):
            compute_metrics([])

    def test_mixed(self):
        with pytest.raises(MixedCell):
            compute_metrics(synthetic(2, 1, 1, 1) + synthetic(2, 1, 1, 1, pipeline="IR"))

    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            Metrics(N=10, AN=3, PN=2, ON=3)

    @given(st.integers(1, 60).flatmap(lambda n: st.tuples(
        st.just(n), st.integers(0, n), st.integers(0, n))).flatmap(
        lambda t: st.tuples(st.just(t[0]), st.just(t[1]), st.just(t[2]),
                            st.integers(max(0, t[1] + t[2] - t[0]), min(t[1], t[2])))))
    def test_counts(self, nums):
        n, an, pn, on = nums
        m = compute_metrics(synthetic(n, an, pn, on))
        assert (m.N, m.AN, m.PN, m.ON) == (n, an, pn, on)
        assert m.AA == Fraction(an, n) and m.OA <= min(m.AA, m.AP)


class TestRunPipeline:
    def test_ir_matches_reasoner(self, demo, exemplars):
        records = run(demo, exemplars, pipeline="IR")
        assert [r.instance_id for r in records] == [i.id for i in demo]
        for inst, rec in zip(demo, records):
            expected, _ = indirect_answer(KnowledgeBase(inst.facts, inst.rules), inst.question)
            assert rec.predicted is expected
            if expected.definite:
                assert rec.answer_correct and rec.overall_correct

    def test_dir_pools_both_paths(self, demo, exemplars):
        for rec in run(demo, exemplars, pipeline="DIR"):
            assert {b.source for b in rec.tally.candidates} == {"DR", "IR"}
            assert set(rec.completions) == {"DR#0", "IR#0"}

    def test_self_consistency_samples(self, demo, exemplars):
        sampling = SamplingConfig(num_samples=5, seed=1)
        rec = run(demo[:2], exemplars, pipeline="DIR", sampling=sampling)[0]
        assert rec.tally.m == 10

    def test_full_flip(self, demo, exemplars):
        records = run(demo, exemplars, faults=[Fault("flip")], pipeline="IR", rule_aug="symbolic")
        definite = [r for r, i in zip(records, demo)
                    if indirect_answer(KnowledgeBase(i.facts, augment(i.rules)), i.question)[0].definite]
        assert definite and not any(r.answer_correct for r in definite)

    def test_symbolic_self_play(self, demo, exemplars):
        records = run(demo, exemplars, pipeline="IR", rule_aug="symbolic")
        for inst, rec in zip(demo, records):
            kb = KnowledgeBase(inst.facts, augment(inst.rules))
            complete = indirect_answer(kb, inst.question)[0] == model_check(kb, inst.question)
            if inst.gold_answer.definite and complete:
                assert rec.overall_correct, inst.id

    def test_failures_counted(self, demo, exemplars):
        records = run(demo, exemplars, faults=[Fault("garbage", "IR", max_depth=1)], pipeline="IR")
        m = compute_metrics(records)
        failed = [r for r in records if r.failed]
        assert failed and all(r.depth == 1 for r in failed)
        assert m.N == len(demo) and m.failed == len(failed)
        wrong = sum(not r.answer_correct and not r.failed for r in records)
        assert m.AN + m.failed + wrong == m.N

    def test_provider_failures_do_not_abort(self, demo, exemplars):
        records = run(demo, exemplars, faults=[Fault("fail", min_depth=5)], pipeline="DR")
        assert all(r.failed == (r.depth == 5) for r in records)
        assert all(r.error for r in records if r.failed)

    def test_math_graded_on_answer_only(self, proofmath):
        key = {i.question_text(): i.gold_answer for i in proofmath}
        client = LLMClient(MockBackend(answer_key=key))
        records = run_pipeline(proofmath, PipelineConfig(pipeline="IR", prompt_style="zero-shot"), client)
        m = compute_metrics(records)
        assert m.AA == 1 and m.PN == 0 and m.ungraded == m.N

    def test_ties_fall_back_deterministically(self, demo, exemplars):
        records = run(demo, exemplars, faults=[Fault("flip", "DR")], pipeline="DIR",
                      tie_strategy="deterministic", rule_aug="symbolic")
        tied = [r for r in records if r.tally.resolution == "deterministic-fallback"]
        assert tied and all(r.predicted is U for r in tied)

    def test_empty_dataset(self, exemplars):
        with pytest.raises(EmptyRun):
            run([], exemplars)

    def test_deterministic(self, demo, exemplars):
        faults = [Fault("flip", probability=0.3)]
        a = run(demo, exemplars, faults, pipeline="DIR", sampling=SamplingConfig(num_samples=3, seed=9))
        b = run(demo, exemplars, faults, pipeline="DIR", sampling=SamplingConfig(num_samples=3, seed=9))
        assert [r.to_dict() for r in a] == [r.to_dict() for r in b]
        assert compute_metrics(a) == compute_metrics(b)


class TestReport:
    def cells(self):
        return [("DR", Metrics(10, 5, 2, 2, pipeline="DR", rule_aug=False)),
                ("IR", Metrics(10, 7, 5, 4, pipeline="IR", rule_aug=False))]

    def test_two_cells(self):
        report = compare_runs(self.cells())
        assert "IR vs DR" in report.text
        assert report.data["deltas"] == [{"a": "DR", "b": "IR", "AA": pytest.approx(0.2),
                                          "AP": pytest.approx(0.3), "OA": pytest.approx(0.2)}]
        assert report.data["grid"] is None

    def test_ablation_grid(self):
        cells = self.cells() + [("DR+RA", Metrics(10, 8, 6, 6, pipeline="DR", rule_aug=True)),
                                ("IR+RA", Metrics(10, 9, 9, 9, pipeline="IR", rule_aug=True))]
        report = compare_runs(cells)
        assert report.data["grid"] == {"DR": {"off": 0.2, "on": 0.6}, "IR": {"off": 0.4, "on": 0.9}}
        assert "rule augmentation (OA)" in report.text

    def test_single_cell(self):
        with pytest.raises(ValueError):
            compare_runs(self.cells()[:1])

    def test_ungraded_note(self):
        cells = [("a", Metrics(3, 3, 0, 0, ungraded=3)), ("b", Metrics(3, 2, 0, 0, ungraded=3))]
        assert "ungraded" in compare_runs(cells).text.split("\n\n")[-1]


class TestRunDirectory:
    def test_round_trip(self, tmp_path, demo, exemplars):
        records = run(demo[:5], exemplars, pipeline="DIR")
        m = compute_metrics(records)
        path = write_run(records, m, {"pipeline": "dir"}, tmp_path, "demo")
        assert path.parent == tmp_path and path.name.endswith("-demo")
        assert {p.name for p in path.iterdir()} == {"header.json", "config.json", "completions.jsonl",
                                                    "records.jsonl", "metrics.json", "report.txt"}
        loaded = load_run(path)
        assert loaded.metrics == m and loaded.label == "demo"
        assert [r.to_dict() for r in loaded.records] == [r.to_dict() for r in records]
        assert loaded.records[0].completions == records[0].completions

    def test_same_second_does_not_clobber(self, tmp_path, demo, exemplars):
        records = run(demo[:2], exemplars)
        m = compute_metrics(records)
        a = write_run(records, m, {}, tmp_path, "x")
        b = write_run(records, m, {}, tmp_path, "x")
        assert a != b

    def test_corrupt(self, tmp_path):
        (tmp_path / "header.json").write_text("{", encoding="utf-8")
        with pytest.raises(RunFileError):
            load_run(tmp_path)
        with pytest.raises(RunFileError):
            load_run(tmp_path / "missing")
