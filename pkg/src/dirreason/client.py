"""Completion backends: a chat-completions HTTP client and an offline mock.

The mock answers by running the symbolic reasoners on the instance embedded
in the prompt, so offline runs exercise the whole pipeline deterministically.
"""

from __future__ import annotations

import hashlib
import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Optional, Sequence

import httpx

from .logic import RuleSet, augment, contrapositives
from .parsing import ParseError, ProblemInstance, parse_rule, verbalize_rule
from .prompts import (
    TRACE_INSTRUCTION,
    PromptKind,
    PromptText,
    Unparseable,
    augmentation_targets,
    direct_explanation,
    embedded_instance,
    extract_answer,
    format_trace,
    indirect_explanation,
)
from .reasoner import Answer, InconsistentKB, KnowledgeBase, check_trace, direct_answer, indirect_answer

log = logging.getLogger(__name__)

PROFILES = {
    "gpt-3.5-turbo": {"model": "gpt-3.5-turbo", "temperature": 0.7},
    "gemini-pro": {"model": "gemini-pro", "temperature": 0.9},
}


@dataclass(frozen=True)
class SamplingConfig:
    model: str = "gpt-3.5-turbo"
    temperature: float = 0.7
    num_samples: int = 1
    max_tokens: int = 1024
    seed: Optional[int] = None

    def __post_init__(self):
        if not 0 <= self.temperature <= 2:
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")

    @classmethod
    def from_profile(cls, name: str, **overrides) -> "SamplingConfig":
        if name not in PROFILES:
            raise KeyError(f"unknown profile {name!r}; known: {sorted(PROFILES)}")
        return cls(**{**PROFILES[name], **overrides})


@dataclass(frozen=True)
class Completion:
    text: str
    backend: str  # "http" or "mock"
    latency: float = 0.0
    usage: Optional[Mapping[str, int]] = None
    retries: int = 0


class ClientError(RuntimeError):
    pass


class AuthError(ClientError):
    pass


class RateLimitExhausted(ClientError):
    pass


class TransportError(ClientError):
    pass


class ProviderError(ClientError):
    def __init__(self, body, status: Optional[int] = None):
        self.body = body
        self.status = status
        super().__init__(f"provider error{f' {status}' if status else ''}: {str(body)[:200]}")


class SampleShortfall(ClientError):
    def __init__(self, got: int, want: int, completions: Sequence[Completion] = (), errors=()):
        self.got = got
        self.want = want
        self.completions = list(completions)
        self.errors = list(errors)
        super().__init__(f"got {got} of {want} samples")


# --- HTTP --------------------------------------------------------------------

class HttpBackend:
    name = "http"

    def __init__(self, endpoint: Optional[str] = None, api_key: Optional[str] = None, *,
                 max_retries: int = 4, backoff: float = 0.5, max_backoff: float = 8.0,
                 timeout: float = 60.0, transport: Optional[httpx.BaseTransport] = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.endpoint = endpoint or os.environ.get("IR_ENDPOINT") or "https://api.openai.com/v1/chat/completions"
        self.api_key = api_key if api_key is not None else os.environ.get("IR_API_KEY")
        if not self.api_key:
            raise AuthError("IR_API_KEY is not set")
        self.max_retries = max_retries
        self.backoff = backoff
        self.max_backoff = max_backoff
        self.sleep = sleep
        self._http = httpx.Client(timeout=timeout, transport=transport)

    def close(self):
        self._http.close()

    def _delay(self, attempt: int, retry_after: Optional[str]) -> float:
        if retry_after:
            try:
                return min(float(retry_after), self.max_backoff)
            except ValueError:
                pass
        return min(self.backoff * 2 ** attempt, self.max_backoff)

    def send(self, prompt: PromptText, cfg: SamplingConfig, sample_index: int = 0) -> Completion:
        payload = {
            "model": cfg.model,
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
            "messages": [{"role": "user", "content": prompt.body}],
        }
        headers = {"Authorization": f"Bearer {self.api_key}"}
        start = time.monotonic()
        attempt = 0
        while True:
            retry_after = None
            try:
                resp = self._http.post(self.endpoint, json=payload, headers=headers)
            except httpx.TransportError as exc:
                failure: ClientError = TransportError(f"{type(exc).__name__}: {exc}")
            else:
                if resp.status_code in (401, 403):
                    raise AuthError(f"HTTP {resp.status_code}: credentials rejected")
                if resp.status_code == 200:
                    return self._completion(resp, start, attempt)
                if resp.status_code == 429:
                    failure = RateLimitExhausted(f"rate limited after {attempt} retries")
                    retry_after = resp.headers.get("retry-after")
                elif resp.status_code >= 500:
                    failure = ProviderError(resp.text, resp.status_code)
                else:
                    raise ProviderError(resp.text, resp.status_code)
            if attempt >= self.max_retries:
                raise failure
            delay = self._delay(attempt, retry_after)
            log.debug("transient failure (%s); retry %d in %.2fs", failure, attempt + 1, delay)
            self.sleep(delay)
            attempt += 1

    def _completion(self, resp: httpx.Response, start: float, retries: int) -> Completion:
        try:
            data = resp.json()
            choice = data["choices"][0]
            text = choice["message"]["content"] if "message" in choice else choice["text"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise ProviderError(resp.text, resp.status_code) from None
        if text is None:
            raise ProviderError(resp.text, resp.status_code)
        return Completion(text, self.name, time.monotonic() - start, data.get("usage"), retries)


# --- mock --------------------------------------------------------------------

DR_PATH, IR_PATH = "DR", "IR"

_PATH_OF_KIND = {
    PromptKind.FEW_SHOT_DR: DR_PATH,
    PromptKind.ZERO_SHOT_DR: DR_PATH,
    PromptKind.FEW_SHOT_IR: IR_PATH,
    PromptKind.ZERO_SHOT_IR: IR_PATH,
}

_FLIP = {Answer.TRUE: Answer.FALSE, Answer.FALSE: Answer.TRUE, Answer.UNKNOWN: Answer.TRUE}

GARBAGE = "I could not work out how the statements relate to each other."


@dataclass(frozen=True)
class Fault:
    """Error injection for the mock.

    ``kind`` is ``flip`` (wrong verdict, inconsistent trace), ``garbage`` (no
    answer marker) or ``fail`` (the request raises ProviderError).  The fault
    applies to prompts on ``path`` (DR, IR or any) whose instance depth lies in
    ``[min_depth, max_depth]``; prompts without a known depth only match when
    neither bound is set.
    """

    kind: str = "flip"
    path: str = "any"
    min_depth: Optional[int] = None
    max_depth: Optional[int] = None
    probability: float = 1.0

    def __post_init__(self):
        if self.kind not in ("flip", "garbage", "fail"):
            raise ValueError(f"unknown fault kind {self.kind!r}")
        if self.path not in ("any", DR_PATH, IR_PATH):
            raise ValueError(f"unknown fault path {self.path!r}")
        if not 0 <= self.probability <= 1:
            raise ValueError("probability must be in [0, 1]")

    def matches(self, path: str, depth: Optional[int]) -> bool:
        if self.path != "any" and self.path != path:
            return False
        if self.min_depth is None and self.max_depth is None:
            return True
        if depth is None:
            return False
        lo = self.min_depth if self.min_depth is not None else 0
        hi = self.max_depth if self.max_depth is not None else depth
        return lo <= depth <= hi


class MockBackend:
    """Offline backend backed by the symbolic reasoners.

    The mock reasons by unit propagation over exactly the rules shown in the
    prompt; it does not contrapose on its own unless ``use_contrapositives``
    is set.  Zero-shot (math) prompts are answered from ``answer_key``, a map
    from question text to answer, and fall back to Unknown.
    """

    name = "mock"

    def __init__(self, seed: int = 0, faults: Sequence[Fault] = (),
                 answer_key: Optional[Mapping[str, Answer]] = None,
                 use_contrapositives: bool = False):
        self.seed = seed
        self.faults = tuple(faults)
        self.answer_key = dict(answer_key or {})
        self.use_contrapositives = use_contrapositives

    def _rng(self, prompt: PromptText, cfg: SamplingConfig, sample_index: int) -> random.Random:
        digest = hashlib.sha256(prompt.body.encode("utf-8")).hexdigest()
        seed = cfg.seed if cfg.seed is not None else self.seed
        return random.Random(f"{seed}|{digest}|{sample_index}")

    def send(self, prompt: PromptText, cfg: SamplingConfig, sample_index: int = 0) -> Completion:
        rng = self._rng(prompt, cfg, sample_index)
        kind = prompt.kind
        if kind is PromptKind.RULE_AUGMENTATION:
            text = self._contrapose(prompt.body)
        elif kind is PromptKind.CONFLICT_RESOLUTION:
            text = self._arbitrate(prompt.body)
        else:
            text = self._answer(prompt, rng)
        return Completion(text, self.name, 0.0, {"completion_tokens": len(text.split())}, 0)

    def _fault(self, path: str, depth: Optional[int], rng: random.Random) -> Optional[str]:
        for f in self.faults:
            # Draw for every matching fault so the stream does not depend on earlier outcomes.
            if f.matches(path, depth) and rng.random() < f.probability:
                return f.kind
        return None

    def _contrapose(self, body: str) -> str:
        out = []
        for text in augmentation_targets(body):
            try:
                rule = parse_rule(text)
            except ParseError:
                continue
            out += [verbalize_rule(c) for c in contrapositives(rule)]
        return "\n".join(out)

    def _answer(self, prompt: PromptText, rng: random.Random) -> str:
        path = _PATH_OF_KIND[prompt.kind]
        fault = self._fault(path, prompt.meta.get("depth"), rng)
        if fault == "fail":
            raise ProviderError("injected failure", 500)
        if fault == "garbage":
            return GARBAGE
        if prompt.kind in (PromptKind.ZERO_SHOT_IR, PromptKind.ZERO_SHOT_DR):
            question = prompt.body.split("\n", 1)[0].removeprefix("# Question: ").strip()
            verdict = self.answer_key.get(question, Answer.UNKNOWN)
            if fault == "flip":
                verdict = _FLIP[verdict]
            return f"Considering all possibilities, the original proposition is {verdict.value.lower()}.\nAnswer: {verdict}"
        embedded = embedded_instance(prompt.body)
        if embedded is None:
            return GARBAGE
        facts, rules, question = embedded
        rs = RuleSet(rules)
        if self.use_contrapositives:
            rs = augment(rs)
        try:
            kb = KnowledgeBase(facts, rs)
            if path == IR_PATH:
                verdict, trace = indirect_answer(kb, question)
            else:
                verdict, trace = direct_answer(kb, question)
        except InconsistentKB:
            return "The facts contradict each other, so nothing can be concluded.\nAnswer: Unknown"
        inst = ProblemInstance("mock", "factual", tuple(facts), rs, question, verdict)
        if path == IR_PATH:
            explanation = indirect_explanation(inst, trace, kb)
        else:
            explanation = direct_explanation(inst, trace)
        if fault == "flip":
            verdict = _FLIP[verdict]
            trace = _with_verdict(trace, verdict)
            explanation += f" On reflection, the answer is {verdict}."
        lines = [explanation]
        if TRACE_INSTRUCTION in prompt.body:
            lines.append(format_trace(trace))
        lines.append(f"Answer: {verdict}")
        return "\n".join(lines)

    def _arbitrate(self, body: str) -> str:
        """Pick the first reasoning whose trace checks out against the context."""
        embedded = embedded_instance(body)
        candidates = _reasonings(body)
        if embedded is not None:
            facts, rules, question = embedded
            try:
                kb = KnowledgeBase(facts, RuleSet(rules))
            except InconsistentKB:
                kb = None
            if kb is not None:
                for n, text in candidates:
                    try:
                        answer, trace = extract_answer(text)
                    except Unparseable:
                        continue
                    if trace is not None and trace.verdict is answer and check_trace(kb, trace, question):
                        return f"Reasoning {n} is more reliable because every step follows from the facts and rules.\nAnswer: {answer}"
        return "Neither reasoning can be verified step by step.\nAnswer: Unknown"


def _with_verdict(trace, verdict: Answer):
    return replace(trace, verdict=verdict)


def _reasonings(body: str) -> list[tuple[int, str]]:
    out = []
    parts = body.split("\n# Reasoning ")
    for part in parts[1:]:
        head, _, rest = part.partition(":\n")
        if head.isdigit():
            text = rest.split("\n# Which reasoning", 1)[0]
            out.append((int(head), text))
    return out


# --- client ------------------------------------------------------------------

class LLMClient:
    """Thread-safe front end; ``max_in_flight`` bounds concurrent requests."""

    def __init__(self, backend, max_in_flight: int = 4):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self.backend = backend
        self.max_in_flight = max_in_flight
        self._slots = threading.BoundedSemaphore(max_in_flight)

    @property
    def backend_name(self) -> str:
        return self.backend.name

    def _send(self, prompt: PromptText, cfg: SamplingConfig, index: int) -> Completion:
        with self._slots:
            return self.backend.send(prompt, cfg, index)

    def _attempt(self, prompt, cfg, index):
        try:
            return self._send(prompt, cfg, index), None
        except ClientError as exc:
            return None, exc

    def complete(self, prompt: PromptText, cfg: SamplingConfig) -> Completion:
        return self._send(prompt, cfg, 0)

    def sample_n(self, prompt: PromptText, cfg: SamplingConfig) -> list[Completion]:
        """M independent requests, returned in sample order.

        Auth failures propagate; any other failure surviving the retries turns
        into SampleShortfall carrying the successful samples.
        """
        m = cfg.num_samples
        results: list = [None] * m
        errors = []
        if m == 1:
            outcomes = [self._attempt(prompt, cfg, 0)]
        else:
            with ThreadPoolExecutor(max_workers=min(m, self.max_in_flight)) as pool:
                outcomes = list(pool.map(lambda i: self._attempt(prompt, cfg, i), range(m)))
        for i, (completion, exc) in enumerate(outcomes):
            if isinstance(exc, AuthError):
                raise exc
            if exc is not None:
                errors.append(exc)
            results[i] = completion
        got = [c for c in results if c is not None]
        if errors:
            raise SampleShortfall(len(got), m, got, errors)
        return got


def make_backend(name: str, seed: int = 0, **kwargs):
    if name == "mock":
        return MockBackend(seed=seed, **kwargs)
    if name == "http":
        return HttpBackend(**kwargs)
    raise ValueError(f"unknown backend {name!r}")
