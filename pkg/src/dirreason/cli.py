"""``dirreason`` command line: augment, solve, run, report.

Exit codes: 0 success, 1 soundness violations (solve), 2 usage or config
error, 3 dataset or run-file error, 4 authentication failure.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import logging
import os
import sys
import time
from collections import Counter
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Optional

from . import __version__
from .client import PROFILES, AuthError, Fault, HttpBackend, LLMClient, MockBackend, SamplingConfig
from .harness import (
    PipelineConfig,
    RunFileError,
    augment_instance,
    compare_runs,
    compute_metrics,
    load_run,
    metrics_table,
    run_pipeline,
    write_run,
)
from .kbgen import iter_family, literals
from .logic import augment
from .parsing import ParseError, SchemaError, load_dataset, write_dataset
from .prompts import load_exemplars, select_exemplars
from .reasoner import INCONSISTENT, Answer, InconsistentKB, KnowledgeBase, check_trace, direct_answer, indirect_answer, model_check

log = logging.getLogger("dirreason")

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_DATA, EXIT_AUTH = 0, 1, 2, 3, 4

BUILTIN = {"demo": "demo.jsonl", "proofmath": "proofmath_sample.jsonl", "exemplars": "exemplars.jsonl"}


class ConfigError(ValueError):
    pass


def data_path(name: str) -> Path:
    """Resolve a dataset argument; the names in BUILTIN point at packaged files."""
    if name in BUILTIN:
        return Path(str(resources.files("dirreason") / "data" / BUILTIN[name]))
    return Path(name)


@dataclass
class RunConfig:
    dataset: str = "demo"
    pipeline: str = "ir"
    prompt_style: str = "few-shot"
    rule_aug: str = "off"
    num_samples: int = 1
    profile: str = "gpt-3.5-turbo"
    model: str = ""
    temperature: Optional[float] = None
    max_tokens: int = 1024
    backend: str = "mock"
    seed: int = 0
    output: str = "runs"
    exemplars: str = ""
    exemplar_ids: str = ""
    structured_trace: bool = True
    tie_strategy: str = "llm"
    workers: int = 4
    max_in_flight: int = 4
    faults: str = ""
    label: str = ""
    endpoint: str = ""
    api_key: str = field(default="", repr=False)

    def validate(self):
        if self.pipeline not in ("dr", "ir", "dir"):
            raise ConfigError(f"pipeline must be dr, ir or dir, not {self.pipeline!r}")
        if self.prompt_style not in ("few-shot", "zero-shot"):
            raise ConfigError("prompt_style must be few-shot or zero-shot")
        if self.prompt_style == "zero-shot" and self.exemplars:
            raise ConfigError("zero-shot prompting takes no exemplar pool")
        if self.rule_aug not in ("off", "symbolic", "llm"):
            raise ConfigError("rule_aug must be off, symbolic or llm")
        if self.backend not in ("mock", "http"):
            raise ConfigError("backend must be mock or http")
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}; known: {', '.join(sorted(PROFILES))}")
        if self.num_samples < 1:
            raise ConfigError("num_samples must be at least 1")
        parse_faults(self.faults)

    @property
    def exemplar_pool(self) -> Optional[str]:
        if self.prompt_style == "zero-shot":
            return None
        return self.exemplars or "exemplars"

    def sampling(self) -> SamplingConfig:
        overrides = {"num_samples": self.num_samples, "max_tokens": self.max_tokens, "seed": self.seed}
        if self.model:
            overrides["model"] = self.model
        if self.temperature is not None:
            overrides["temperature"] = self.temperature
        try:
            return SamplingConfig.from_profile(self.profile, **overrides)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(self.pipeline.upper(), self.prompt_style, self.rule_aug, self.sampling(),
                              self.structured_trace, self.tie_strategy, self.workers)

    def snapshot(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("api_key")
        d.pop("output")  # where a run lands does not change what it computes
        return d


def _coerce(f: dataclasses.Field, raw: str):
    kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    if "bool" in kind:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{f.name}: expected a boolean, got {raw!r}")
    try:
        if "int" in kind:
            return int(raw)
        if "float" in kind:
            return float(raw) if raw.strip() else None
    except ValueError:
        raise ConfigError(f"{f.name}: cannot parse {raw!r}") from None
    return raw.strip()


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    try:
        text = Path(path).read_text(encoding="utf-8")
        parser.read_string("[run]\n" + text, source=path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"bad config {path}: {exc}") from None
    known = {f.name: f for f in fields(RunConfig)}
    out = {}
    for key, raw in parser["run"].items():
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = _coerce(known[key], raw)
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    if os.environ.get("IR_ENDPOINT"):
        values["endpoint"] = os.environ["IR_ENDPOINT"]
    if os.environ.get("IR_API_KEY"):
        values["api_key"] = os.environ["IR_API_KEY"]
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def parse_faults(spec: str) -> list[Fault]:
    """``kind:path:depths[:probability]`` items separated by commas.

    ``depths`` is ``lo-hi``, ``lo-``, ``-hi``, a single depth, or empty.
    Example: ``flip:DR:3-,flip:IR:-2``.
    """
    out = []
    for item in filter(None, (s.strip() for s in spec.split(","))):
        parts = item.split(":")
        if not 2 <= len(parts) <= 4:
            raise ConfigError(f"bad fault spec {item!r}")
        kind, path = parts[0], parts[1]
        depths = parts[2] if len(parts) > 2 else ""
        lo = hi = None
        try:
            if "-" in depths:
                a, b = depths.split("-", 1)
                lo, hi = (int(a) if a else None), (int(b) if b else None)
            elif depths:
                lo = hi = int(depths)
            prob = float(parts[3]) if len(parts) > 3 else 1.0
            out.append(Fault(kind, path if path == "any" else path.upper(), lo, hi, prob))
        except ValueError as exc:
            raise ConfigError(f"bad fault spec {item!r}: {exc}") from None
    return out


def make_client(cfg: RunConfig, dataset=()) -> LLMClient:
    if cfg.backend == "http":
        backend = HttpBackend(cfg.endpoint or None, cfg.api_key or None)
    else:
        # Offline stand-in for free-text proofs: the mock knows their gold answers.
        key = {inst.question_text(): inst.gold_answer for inst in dataset if not inst.factual}
        backend = MockBackend(cfg.seed, parse_faults(cfg.faults), key)
    return LLMClient(backend, cfg.max_in_flight)


# --- commands ----------------------------------------------------------------

def cmd_augment(args, cfg: RunConfig) -> int:
    src = data_path(args.dataset)
    dataset = load_dataset(src)
    client = make_client(cfg, dataset) if args.mode == "llm" else None
    out = []
    for inst in dataset:
        new = augment_instance(inst, args.mode, client, cfg.sampling())
        out.append(new)
        for rule in new.rules:
            origin = "original" if rule in inst.rules else f"contrapositive ({rule.source or 'llm'})"
            print(f"{inst.id}\t{rule.rid}\t{origin}\t{rule}")
    dest = Path(args.out) if args.out else Path(cfg.output) / f"{src.stem}.{args.mode}-aug.jsonl"
    dest.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(out, dest)
    added = sum(len(b.rules) - len(a.rules) for a, b in zip(dataset, out))
    print(f"wrote {len(out)} instances ({added} rules added) to {dest}")
    return EXIT_OK


@dataclass
class SolveSummary:
    checked: int = 0
    skipped: int = 0
    inconsistent: int = 0
    violations: list = field(default_factory=list)
    gap: Counter = field(default_factory=Counter)
    matrix: dict = field(default_factory=lambda: {"direct": Counter(), "indirect": Counter()})
    conflicts: int = 0

    def add(self, name: str, kb: KnowledgeBase, q):
        oracle = model_check(kb, q)
        if oracle is INCONSISTENT:
            self.inconsistent += 1
            return
        try:
            d, dt = direct_answer(kb, q)
            i, it = indirect_answer(kb, q)
        except InconsistentKB:
            self.violations.append((name, q, "reasoner rejected a satisfiable KB"))
            return
        self.checked += 1
        for label, ans, trace in (("direct", d, dt), ("indirect", i, it)):
            self.matrix[label][(ans, oracle)] += 1
            if ans.definite and ans != oracle:
                self.violations.append((name, q, f"{label} says {ans}, oracle says {oracle}"))
            elif not ans.definite and oracle.definite:
                self.gap[label] += 1
            check = check_trace(kb, trace, q)
            if not check:
                self.violations.append((name, q, f"{label} trace invalid: {check.reason}"))
        if d.definite and i.definite and d != i:
            self.conflicts += 1

    def render(self) -> str:
        lines = [f"checked {self.checked} question(s); skipped {self.skipped}; "
                 f"inconsistent KBs {self.inconsistent}"]
        answers = (Answer.TRUE, Answer.FALSE, Answer.UNKNOWN)
        for label in ("direct", "indirect"):
            lines.append(f"{label} (rows) vs oracle (columns)")
            lines.append("          " + "".join(a.value.rjust(10) for a in answers))
            for r in answers:
                lines.append(r.value.ljust(10) + "".join(str(self.matrix[label][(r, c)]).rjust(10) for c in answers))
        lines.append(f"gap (reasoner Unknown, oracle definite): direct {self.gap['direct']}, "
                     f"indirect {self.gap['indirect']}")
        lines.append(f"direct/indirect conflicts: {self.conflicts}")
        lines.append(f"soundness violations: {len(self.violations)}")
        for name, q, msg in self.violations[:20]:
            lines.append(f"  {name} {q!r}: {msg}")
        return "\n".join(lines)


def cmd_solve(args, cfg: RunConfig) -> int:
    summary = SolveSummary()
    start = time.monotonic()
    if args.enumerate:
        for n, (n_atoms, kb) in enumerate(iter_family()):
            if args.augment:
                kb = KnowledgeBase(kb.facts, augment(kb.rules))
            for q in literals(n_atoms):
                summary.add(f"kb{n}", kb, q)
    else:
        if not args.dataset:
            print("error: give a dataset or --enumerate", file=sys.stderr)
            return EXIT_USAGE
        for inst in load_dataset(data_path(args.dataset)):
            if not inst.factual:
                summary.skipped += 1
                print(f"skipping {inst.id}: {inst.task} records have no symbolic form")
                continue
            rules = augment(inst.rules) if args.augment else inst.rules
            try:
                kb = KnowledgeBase(inst.facts, rules)
            except InconsistentKB:
                summary.inconsistent += 1
                continue
            summary.add(inst.id, kb, inst.question)
    print(summary.render())
    print(f"elapsed {time.monotonic() - start:.1f}s")
    return EXIT_VIOLATION if summary.violations else EXIT_OK


def cmd_run(args, cfg: RunConfig) -> int:
    dataset = load_dataset(data_path(cfg.dataset))
    exemplars = []
    if cfg.exemplar_pool:
        pool = load_exemplars(data_path(cfg.exemplar_pool))
        ids = [s.strip() for s in cfg.exemplar_ids.split(",") if s.strip()] or None
        exemplars = select_exemplars(pool, ids)
    pcfg = cfg.pipeline_config()
    client = make_client(cfg, dataset)
    records = run_pipeline(dataset, pcfg, client, exemplars)
    metrics = compute_metrics(records)
    label = cfg.label or f"{cfg.pipeline}-{cfg.prompt_style}-aug-{cfg.rule_aug}"
    path = write_run(records, metrics, cfg.snapshot(), cfg.output, label)
    print(metrics_table(label, metrics), end="")
    if pcfg.pipeline == "DIR":
        for r in records:
            if r.tally:
                votes = " ".join(f"{b.source}:{b.answer}" for b in r.tally.candidates)
                print(f"  {r.instance_id}: {votes} -> {r.predicted} ({r.tally.resolution})")
    print(f"run written to {path}")
    return EXIT_OK


def cmd_report(args, cfg: RunConfig) -> int:
    runs = [load_run(p) for p in args.runs]
    cells = [(r.label, r.metrics) for r in runs]
    if len(cells) == 1:
        print(metrics_table(*cells[0]), end="")
        return EXIT_OK
    report = compare_runs(cells)
    print(report.text, end="")
    if args.json:
        Path(args.json).write_text(json.dumps(report.data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


# --- argument parsing --------------------------------------------------------

def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS keeps a flag given before the subcommand from being reset after it.
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--config", default=argparse.SUPPRESS, help="flat key=value config file")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    g.add_argument("--output", default=argparse.SUPPRESS, help="output directory (default: runs)")
    g.add_argument("--backend", choices=("mock", "http"), default=argparse.SUPPRESS)
    g.add_argument("--print-config", action="store_true", default=argparse.SUPPRESS,
                   help="print the effective config and exit")
    g.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    return g


def build_parser() -> argparse.ArgumentParser:
    g = _global_flags()
    p = argparse.ArgumentParser(prog="dirreason", parents=[g],
                                description="Direct and indirect reasoning pipeline tools.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command")

    a = sub.add_parser("augment", parents=[g], help="add contrapositive rules to a dataset")
    a.add_argument("dataset")
    a.add_argument("--mode", choices=("symbolic", "llm"), default="symbolic")
    a.add_argument("-o", "--out", help="output file (default: <output>/<name>.<mode>-aug.jsonl)")

    s = sub.add_parser("solve", parents=[g], help="symbolic reasoners against the truth-table oracle")
    s.add_argument("dataset", nargs="?")
    s.add_argument("--enumerate", action="store_true", help="sweep the built-in family of small KBs")
    s.add_argument("--augment", action="store_true", help="augment rules before reasoning")

    r = sub.add_parser("run", parents=[g], help="run a pipeline and write a run directory")
    r.add_argument("--dataset")
    r.add_argument("--pipeline", choices=("dr", "ir", "dir"))
    r.add_argument("--prompt-style", dest="prompt_style", choices=("few-shot", "zero-shot"))
    r.add_argument("--rule-aug", dest="rule_aug", choices=("off", "symbolic", "llm"))
    r.add_argument("-M", "--num-samples", dest="num_samples", type=int)
    r.add_argument("--profile", choices=sorted(PROFILES))
    r.add_argument("--temperature", type=float)
    r.add_argument("--exemplars", help="exemplar pool file (few-shot only)")
    r.add_argument("--exemplar-ids", dest="exemplar_ids", help="comma-separated exemplar ids")
    r.add_argument("--tie-strategy", dest="tie_strategy", choices=("llm", "deterministic"))
    r.add_argument("--faults", help="mock error injection, e.g. flip:DR:3-,flip:IR:-2")
    r.add_argument("--label")
    r.add_argument("--no-trace", dest="structured_trace", action="store_const", const=False,
                   help="omit the structured trace instruction")

    rep = sub.add_parser("report", parents=[g], help="compare run directories")
    rep.add_argument("runs", nargs="+")
    rep.add_argument("--json", help="also write the machine-readable report here")
    return p


COMMANDS = {"augment": cmd_augment, "solve": cmd_solve, "run": cmd_run, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    verbose = getattr(args, "verbose", 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "print_config", False):
        snap = dataclasses.asdict(cfg)
        snap["api_key"] = "***" if cfg.api_key else ""
        for k in sorted(snap):
            print(f"{k} = {'' if snap[k] is None else snap[k]}")
        return EXIT_OK
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AuthError as exc:
        print(f"error: authentication failed: {exc}", file=sys.stderr)
        return EXIT_AUTH
    except (ParseError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, RunFileError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
