"""Answer voting, DR/IR pooling and tie resolution."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .prompts import EmptyInput, NoConflict, Unparseable, extract_answer, render_conflict_resolution
from .reasoner import Answer

log = logging.getLogger(__name__)

MAJORITY = "majority"
UNRESOLVED = "unresolved"
LLM_ARBITRATED = "llm-arbitrated"
FALLBACK = "deterministic-fallback"

ORDER = (Answer.TRUE, Answer.FALSE, Answer.UNKNOWN)


class EmptyBallot(ValueError):
    pass


@dataclass(frozen=True)
class Ballot:
    answer: Answer
    source: str = "IR"  # "DR" or "IR"
    ref: Optional[str] = None  # key of the completion that produced it


@dataclass(frozen=True)
class VoteTally:
    candidates: tuple[Ballot, ...]
    counts: Mapping[Answer, int]
    selected: Optional[Answer]
    probability: Fraction
    resolution: str
    abstentions: int = 0
    arbitration: Optional[str] = field(default=None, compare=False)

    @property
    def m(self) -> int:
        return len(self.candidates)

    @property
    def resolved(self) -> bool:
        return self.resolution != UNRESOLVED

    @property
    def tied(self) -> list[Answer]:
        top = max(self.counts.values())
        return [a for a in ORDER if self.counts.get(a, 0) == top]

    def to_dict(self) -> dict:
        return {
            "candidates": [[b.answer.value, b.source, b.ref] for b in self.candidates],
            "counts": {a.value: self.counts.get(a, 0) for a in ORDER},
            "selected": self.selected.value if self.selected else None,
            "probability": float(self.probability),
            "resolution": self.resolution,
            "abstentions": self.abstentions,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VoteTally":
        cands = tuple(Ballot(Answer(a), s, r) for a, s, r in d["candidates"])
        counts = {Answer(k): v for k, v in d["counts"].items() if v}
        sel = Answer(d["selected"]) if d["selected"] else None
        m = len(cands)
        prob = Fraction(counts.get(sel, 0), m) if sel and m else Fraction(0)
        return cls(cands, counts, sel, prob, d["resolution"], d.get("abstentions", 0))


def _as_ballot(x) -> Ballot:
    if isinstance(x, Ballot):
        return x
    if isinstance(x, Answer):
        return Ballot(x)
    answer, source, *rest = x
    return Ballot(answer, source, rest[0] if rest else None)


def vote(answers: Iterable, abstentions: int = 0) -> VoteTally:
    """Most frequent answer wins; P(A_s) = count(A_s) / M over the parsed ballots.

    ``answers`` holds Ballots, bare Answers or ``(answer, source[, ref])``
    tuples.  A shared maximum leaves the tally unresolved with no selection.
    """
    ballots = tuple(_as_ballot(a) for a in answers)
    if not ballots:
        raise EmptyBallot("no parsed answers to vote on")
    if abstentions:
        log.info("%d unparseable sample(s) left out of the ballot", abstentions)
    counts = Counter(b.answer for b in ballots)
    top = max(counts.values())
    leaders = [a for a in ORDER if counts[a] == top]
    if len(leaders) > 1:
        return VoteTally(ballots, dict(counts), None, Fraction(top, len(ballots)), UNRESOLVED, abstentions)
    return VoteTally(ballots, dict(counts), leaders[0], Fraction(top, len(ballots)), MAJORITY, abstentions)


def combine_dir(dr: Sequence, ir: Sequence, abstentions: int = 0) -> VoteTally:
    """Pool the DR and IR ballots and vote once over the union."""
    if not dr or not ir:
        raise EmptyBallot("both paths need at least one parsed answer")
    pooled = [replace(_as_ballot(b), source="DR") for b in dr]
    pooled += [replace(_as_ballot(b), source="IR") for b in ir]
    return vote(pooled, abstentions)


def _fallback(tally: VoteTally, note: Optional[str] = None) -> VoteTally:
    sel = Answer.UNKNOWN
    return replace(tally, selected=sel, probability=Fraction(tally.counts.get(sel, 0), tally.m),
                   resolution=FALLBACK, arbitration=note)


def resolve(tally: VoteTally, strategy: str = "deterministic", client=None, cfg=None,
            outputs: Optional[Mapping[str, str]] = None, context=None) -> VoteTally:
    """Settle an unresolved tally.

    ``llm`` asks ``client`` to choose between one representative completion
    per tied answer (looked up by ballot ref in ``outputs``); an unusable
    arbitration, or ``deterministic``, settles on Unknown.  Resolved tallies
    are returned as they are.
    """
    if tally.resolved:
        return tally
    if strategy == "deterministic":
        return _fallback(tally)
    if strategy != "llm":
        raise ValueError(f"unknown strategy {strategy!r}")
    if client is None or cfg is None or outputs is None:
        raise ValueError("llm arbitration needs a client, a sampling config and the outputs")
    tied = tally.tied
    reps = []
    for answer in tied:
        ref = next((b.ref for b in tally.candidates if b.answer is answer and b.ref in outputs), None)
        if ref is not None:
            reps.append(outputs[ref])
    if len(reps) < 2:
        return _fallback(tally, "missing completions for arbitration")
    try:
        prompt = render_conflict_resolution(reps, context)
    except (NoConflict, EmptyInput) as exc:
        return _fallback(tally, f"arbitration prompt not rendered: {exc}")
    completion = client.complete(prompt, replace(cfg, num_samples=1))
    try:
        answer, _ = extract_answer(completion.text)
    except Unparseable:
        return _fallback(tally, completion.text)
    if answer not in tied:
        return _fallback(tally, completion.text)
    return replace(tally, selected=answer, probability=Fraction(tally.counts[answer], tally.m),
                   resolution=LLM_ARBITRATED, arbitration=completion.text)
