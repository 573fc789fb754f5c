"""Direct and indirect (proof-by-contradiction) reasoning over rule bases."""

__version__ = "0.1.0"

from .logic import Atom, Literal, Rule, RuleSet, augment, contrapositives, negate
from .reasoner import (
    INCONSISTENT,
    Answer,
    InconsistentKB,
    KnowledgeBase,
    Mode,
    ProofTrace,
    Step,
    check_trace,
    direct_answer,
    forward_closure,
    indirect_answer,
    model_check,
)
from .parsing import ParseError, ProblemInstance, SchemaError, load_dataset, parse_literal, parse_rule, serialize
from .aggregate import Ballot, VoteTally, combine_dir, resolve, vote
from .client import Completion, LLMClient, MockBackend, HttpBackend, SamplingConfig
from .harness import EvalRecord, Metrics, PipelineConfig, compare_runs, compute_metrics, grade, run_pipeline

__all__ = [
    "Atom", "Literal", "Rule", "RuleSet", "augment", "contrapositives", "negate",
    "INCONSISTENT", "Answer", "InconsistentKB", "KnowledgeBase", "Mode", "ProofTrace", "Step",
    "check_trace", "direct_answer", "forward_closure", "indirect_answer", "model_check",
    "ParseError", "ProblemInstance", "SchemaError", "load_dataset", "parse_literal", "parse_rule", "serialize",
    "Ballot", "VoteTally", "combine_dir", "resolve", "vote",
    "Completion", "LLMClient", "MockBackend", "HttpBackend", "SamplingConfig",
    "EvalRecord", "Metrics", "PipelineConfig", "compare_runs", "compute_metrics", "grade", "run_pipeline",
]
