"""Pipeline runner: evaluates datasets, scores the records and compares runs."""

from __future__ import annotations

import datetime as _dt
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Optional, Sequence, Union

from .aggregate import Ballot, EmptyBallot, VoteTally, combine_dir, resolve, vote
from .client import AuthError, LLMClient, SampleShortfall, SamplingConfig
from .logic import augment
from .parsing import ProblemInstance
from .prompts import (
    DEFAULT_AUGMENTATION_EXEMPLARS,
    Exemplar,
    PromptText,
    Unparseable,
    extract_answer,
    extract_contrapositives,
    render_few_shot_dr,
    render_few_shot_ir,
    render_rule_augmentation,
    render_zero_shot_dr,
    render_zero_shot_ir,
)
from .reasoner import Answer, InconsistentKB, KnowledgeBase, ProofTrace, check_trace

log = logging.getLogger(__name__)

PIPELINES = ("DR", "IR", "DIR")
AUG_MODES = ("off", "symbolic", "llm")

CORRECT, INCORRECT, UNGRADED = "correct", "incorrect", "ungraded"


class EmptyRun(ValueError):
    pass


class MixedCell(ValueError):
    pass


class RunFileError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    pipeline: str = "IR"
    prompt_style: str = "few-shot"
    rule_aug: str = "off"
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    structured_trace: bool = True
    tie_strategy: str = "llm"
    workers: int = 4

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise ValueError(f"pipeline must be one of {PIPELINES}")
        if self.rule_aug not in AUG_MODES:
            raise ValueError(f"rule_aug must be one of {AUG_MODES}")
        if self.prompt_style not in ("few-shot", "zero-shot"):
            raise ValueError("prompt_style must be few-shot or zero-shot")
        if self.tie_strategy not in ("llm", "deterministic"):
            raise ValueError("tie_strategy must be llm or deterministic")

    @property
    def paths(self) -> tuple[str, ...]:
        return ("DR", "IR") if self.pipeline == "DIR" else (self.pipeline,)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EvalRecord:
    instance_id: str
    pipeline: str
    rule_aug: bool
    gold: Answer
    predicted: Optional[Answer] = None
    tally: Optional[VoteTally] = None
    trace_status: str = UNGRADED
    answer_correct: bool = False
    completions: dict = field(default_factory=dict)  # ref -> text
    task: str = "factual"
    depth: Optional[int] = None
    error: Optional[str] = None

    @property
    def overall_correct(self) -> bool:
        return self.answer_correct and self.trace_status == CORRECT

    @property
    def failed(self) -> bool:
        return self.predicted is None

    def to_dict(self) -> dict:
        return {
            "id": self.instance_id,
            "pipeline": self.pipeline,
            "rule_aug": self.rule_aug,
            "task": self.task,
            "depth": self.depth,
            "gold": self.gold.value,
            "predicted": self.predicted.value if self.predicted else None,
            "answer_correct": self.answer_correct,
            "trace_status": self.trace_status,
            "overall_correct": self.overall_correct,
            "tally": self.tally.to_dict() if self.tally else None,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict, completions: Optional[dict] = None) -> "EvalRecord":
        return cls(
            d["id"], d["pipeline"], d["rule_aug"], Answer(d["gold"]),
            Answer(d["predicted"]) if d["predicted"] else None,
            VoteTally.from_dict(d["tally"]) if d["tally"] else None,
            d["trace_status"], d["answer_correct"], dict(completions or {}),
            d.get("task", "factual"), d.get("depth"), d.get("error"),
        )


# --- grading -----------------------------------------------------------------

def grade(instance: ProblemInstance, predicted: Optional[Answer],
          trace: Optional[ProofTrace]) -> tuple[bool, str]:
    """(answer correct, trace status).  Math-proof and trace-less outputs are ungraded."""
    answer_correct = predicted is not None and predicted == instance.gold_answer
    if trace is None or not instance.factual:
        return answer_correct, UNGRADED
    try:
        kb = KnowledgeBase(instance.facts, instance.rules)
    except InconsistentKB:
        return answer_correct, INCORRECT
    ok = check_trace(kb, trace, instance.question) and trace.verdict == instance.gold_answer
    return answer_correct, CORRECT if ok else INCORRECT


# --- pipeline ----------------------------------------------------------------

def augment_instance(inst: ProblemInstance, mode: str, client: Optional[LLMClient] = None,
                     sampling: Optional[SamplingConfig] = None) -> ProblemInstance:
    if mode == "off" or not inst.factual or not len(inst.rules):
        return inst
    if mode == "symbolic":
        return inst.with_rules(augment(inst.rules))
    prompt = render_rule_augmentation(inst.rule_texts(), DEFAULT_AUGMENTATION_EXEMPLARS)
    completion = client.complete(prompt, replace(sampling, num_samples=1))
    rules, dropped = extract_contrapositives(completion.text)
    if dropped:
        log.info("%s: dropped %d unparseable contrapositive line(s)", inst.id, dropped)
    return inst.with_rules(inst.rules.extended(rules))


def _prompt(inst: ProblemInstance, path: str, cfg: PipelineConfig,
            exemplars: Sequence[Exemplar]) -> PromptText:
    meta = {"id": inst.id, "depth": inst.gold_depth}
    if inst.factual and cfg.prompt_style == "few-shot":
        render = render_few_shot_ir if path == "IR" else render_few_shot_dr
        p = render(inst, exemplars, cfg.structured_trace)
    else:
        # Math proofs (and zero-shot runs) see the problem text only.
        text = inst.question_text() if not inst.factual else _problem_text(inst)
        p = (render_zero_shot_ir if path == "IR" else render_zero_shot_dr)(text)
    return replace(p, meta=meta)


def _problem_text(inst: ProblemInstance) -> str:
    parts = list(inst.fact_texts()) + list(inst.rule_texts())
    return " ".join(parts + [f"Is it true that {inst.question_text()}"])


def _sample(client: LLMClient, prompt: PromptText, sampling: SamplingConfig, inst_id: str):
    try:
        return client.sample_n(prompt, sampling)
    except SampleShortfall as exc:
        log.warning("%s: %s", inst_id, exc)
        return exc.completions


def evaluate_instance(inst: ProblemInstance, cfg: PipelineConfig, client: LLMClient,
                      exemplars: Sequence[Exemplar]) -> EvalRecord:
    rec = EvalRecord(inst.id, cfg.pipeline, cfg.rule_aug != "off", inst.gold_answer,
                     task=inst.task, depth=inst.gold_depth)
    try:
        work = augment_instance(inst, cfg.rule_aug, client, cfg.sampling)
        ballots: dict[str, list[Ballot]] = {}
        traces: dict[str, Optional[ProofTrace]] = {}
        abstentions = 0
        for path in cfg.paths:
            prompt = _prompt(work, path, cfg, exemplars)
            ballots[path] = []
            for j, completion in enumerate(_sample(client, prompt, cfg.sampling, inst.id)):
                ref = f"{path}#{j}"
                rec.completions[ref] = completion.text
                try:
                    answer, trace = extract_answer(completion.text)
                except Unparseable:
                    abstentions += 1
                    continue
                ballots[path].append(Ballot(answer, path, ref))
                traces[ref] = trace
        if cfg.pipeline == "DIR":
            tally = combine_dir(ballots["DR"], ballots["IR"], abstentions)
        else:
            tally = vote(ballots[cfg.pipeline], abstentions)
        if not tally.resolved:
            tally = resolve(tally, cfg.tie_strategy, client, cfg.sampling, rec.completions, work)
        rec.tally = tally
        rec.predicted = tally.selected
        trace = next((traces[b.ref] for b in tally.candidates
                      if b.answer is tally.selected and traces.get(b.ref) is not None), None)
        rec.answer_correct, rec.trace_status = grade(work, rec.predicted, trace)
    except AuthError:
        raise
    except EmptyBallot as exc:
        rec.error = f"no parseable answer: {exc}"
    except Exception as exc:  # one bad instance must not sink the run
        log.warning("%s failed: %s", inst.id, exc)
        rec.error = f"{type(exc).__name__}: {exc}"
    return rec


def run_pipeline(dataset: Sequence[ProblemInstance], cfg: PipelineConfig, client: LLMClient,
                 exemplars: Sequence[Exemplar] = ()) -> list[EvalRecord]:
    """Evaluate every instance; records come back in dataset order."""
    if not dataset:
        raise EmptyRun("empty dataset")
    if cfg.prompt_style == "few-shot" and any(i.factual for i in dataset) and not exemplars:
        raise ValueError("few-shot prompting needs exemplars")
    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        records = list(pool.map(lambda inst: evaluate_instance(inst, cfg, client, exemplars), dataset))
    for r in records:
        log.info("%s %s predicted=%s gold=%s trace=%s", r.pipeline, r.instance_id,
                 r.predicted, r.gold, r.trace_status)
    return records


# --- metrics -----------------------------------------------------------------

def pct(x) -> str:
    return f"{100 * float(x):.2f}%"


@dataclass(frozen=True)
class Metrics:
    N: int
    AN: int
    PN: int
    ON: int
    ungraded: int = 0
    failed: int = 0
    pipeline: Optional[str] = None
    rule_aug: Optional[bool] = None

    def __post_init__(self):
        if self.N < 1:
            raise EmptyRun("N must be at least 1")
        if min(self.AN, self.PN, self.ON) < 0 or max(self.AN, self.PN) > self.N:
            raise ValueError("counts out of range")
        if self.ON > min(self.AN, self.PN):
            raise ValueError("ON cannot exceed AN or PN")

    @property
    def AA(self) -> Fraction:
        return Fraction(self.AN, self.N)

    @property
    def AP(self) -> Fraction:
        return Fraction(self.PN, self.N)

    @property
    def OA(self) -> Fraction:
        return Fraction(self.ON, self.N)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(AA=float(self.AA), AP=float(self.AP), OA=float(self.OA))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Metrics":
        keys = ("N", "AN", "PN", "ON", "ungraded", "failed", "pipeline", "rule_aug")
        return cls(**{k: d[k] for k in keys if k in d})


def compute_metrics(records: Sequence[EvalRecord]) -> Metrics:
    if not records:
        raise EmptyRun("no records")
    cells = {(r.pipeline, r.rule_aug) for r in records}
    if len(cells) > 1:
        raise MixedCell(f"records span several (pipeline, rule_aug) cells: {sorted(cells)}")
    (pipeline, rule_aug), = cells
    return Metrics(
        N=len(records),
        AN=sum(r.answer_correct for r in records),
        PN=sum(r.trace_status == CORRECT for r in records),
        ON=sum(r.overall_correct for r in records),
        ungraded=sum(r.trace_status == UNGRADED for r in records),
        failed=sum(r.failed for r in records),
        pipeline=pipeline,
        rule_aug=rule_aug,
    )


@dataclass(frozen=True)
class Report:
    text: str
    data: dict

    def __str__(self):
        return self.text


def _row(cols, widths):
    return "  ".join(str(c).ljust(w) if i == 0 else str(c).rjust(w) for i, (c, w) in enumerate(zip(cols, widths)))


def _signed(x: Fraction) -> str:
    return f"{100 * float(x):+.2f}"


def compare_runs(cells: Sequence[tuple[str, Metrics]]) -> Report:
    """AA/AP/OA per cell, pairwise deltas, and an OA grid when the cells
    cover pipelines with augmentation both off and on."""
    if len(cells) < 2:
        raise ValueError("compare_runs needs at least two cells")
    labels = [l for l, _ in cells]
    lw = max(12, *(len(l) for l in labels))
    widths = [lw, 5, 8, 8, 8, 9]
    lines = [_row(["run", "N", "AA", "AP", "OA", "ungraded"], widths)]
    lines.append("-" * (sum(widths) + 2 * (len(widths) - 1)))
    for label, m in cells:
        lines.append(_row([label, m.N, pct(m.AA), pct(m.AP), pct(m.OA), m.ungraded], widths))

    deltas = []
    lines += ["", "deltas (second minus first, percentage points)"]
    dw = [2 * lw + 4, 8, 8, 8]
    lines.append(_row(["pair", "dAA", "dAP", "dOA"], dw))
    for (la, a), (lb, b) in combinations(cells, 2):
        d = {"a": la, "b": lb, "AA": float(b.AA - a.AA), "AP": float(b.AP - a.AP), "OA": float(b.OA - a.OA)}
        deltas.append(d)
        lines.append(_row([f"{lb} vs {la}", _signed(b.AA - a.AA), _signed(b.AP - a.AP), _signed(b.OA - a.OA)], dw))

    grid = _ablation_grid(cells)
    if grid:
        lines += ["", "rule augmentation (OA)"]
        gw = [10, 10, 10, 8]
        lines.append(_row(["pipeline", "aug off", "aug on", "dOA"], gw))
        for pipeline, row in grid.items():
            lines.append(_row([pipeline, pct(row["off"]), pct(row["on"]), _signed(Fraction(row["on"]) - Fraction(row["off"]))], gw))
    if any(m.ungraded for _, m in cells):
        lines += ["", "AP and OA count an ungraded reasoning process as not correct; math-proof "
                      "answers and outputs without a trace block are ungraded."]
    data = {
        "cells": [{"label": l, **m.to_dict()} for l, m in cells],
        "deltas": deltas,
        "grid": {p: {k: float(v) for k, v in row.items()} for p, row in grid.items()} if grid else None,
    }
    return Report("\n".join(lines) + "\n", data)


def _ablation_grid(cells) -> dict:
    by_key = {}
    for _, m in cells:
        if m.pipeline is not None and m.rule_aug is not None:
            by_key.setdefault((m.pipeline, m.rule_aug), m)
    pipelines = [p for p in PIPELINES if (p, False) in by_key and (p, True) in by_key]
    return {p: {"off": by_key[(p, False)].OA, "on": by_key[(p, True)].OA} for p in pipelines}


# --- run directories ---------------------------------------------------------

@dataclass
class Run:
    path: Path
    label: str
    config: dict
    records: list
    metrics: Metrics


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_run(records: Sequence[EvalRecord], metrics: Metrics, config: dict,
              out_dir: Union[str, Path], label: str, now: Optional[_dt.datetime] = None) -> Path:
    """Write ``<out_dir>/<timestamp>-<label>/``.

    Only header.json carries the wall-clock time, so every other file is a
    pure function of the inputs.
    """
    now = now or _dt.datetime.now(_dt.timezone.utc)
    stamp = now.strftime("%Y%m%dT%H%M%S")
    base = Path(out_dir)
    path = base / f"{stamp}-{label}"
    n = 2
    while path.exists():
        path = base / f"{stamp}-{label}-{n}"
        n += 1
    path.mkdir(parents=True)
    (path / "header.json").write_text(_dump({"label": label, "created": now.isoformat()}), encoding="utf-8")
    (path / "config.json").write_text(_dump(config), encoding="utf-8")
    with open(path / "completions.jsonl", "w", encoding="utf-8") as fh:
        for r in records:
            for ref, text in r.completions.items():
                fh.write(json.dumps({"id": r.instance_id, "ref": ref, "text": text}, ensure_ascii=False) + "\n")
    with open(path / "records.jsonl", "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")
    (path / "metrics.json").write_text(_dump({"label": label, **metrics.to_dict()}), encoding="utf-8")
    (path / "report.txt").write_text(metrics_table(label, metrics), encoding="utf-8")
    return path


def metrics_table(label: str, m: Metrics) -> str:
    widths = [max(12, len(label)), 5, 8, 8, 8, 9, 7]
    lines = [_row(["run", "N", "AA", "AP", "OA", "ungraded", "failed"], widths),
             _row([label, m.N, pct(m.AA), pct(m.AP), pct(m.OA), m.ungraded, m.failed], widths)]
    return "\n".join(lines) + "\n"


def load_run(path: Union[str, Path]) -> Run:
    path = Path(path)
    try:
        header = json.loads((path / "header.json").read_text(encoding="utf-8"))
        config = json.loads((path / "config.json").read_text(encoding="utf-8"))
        metrics = Metrics.from_dict(json.loads((path / "metrics.json").read_text(encoding="utf-8")))
        completions: dict = {}
        with open(path / "completions.jsonl", encoding="utf-8") as fh:
            for line in fh:
                row = json.loads(line)
                completions.setdefault(row["id"], {})[row["ref"]] = row["text"]
        records = []
        with open(path / "records.jsonl", encoding="utf-8") as fh:
            for line in fh:
                d = json.loads(line)
                records.append(EvalRecord.from_dict(d, completions.get(d["id"])))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise RunFileError(f"{path}: {exc}") from exc
    return Run(path, header.get("label", path.name), config, records, metrics)
