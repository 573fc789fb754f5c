"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

from contextlib import contextmanager

RESULTS: dict[int, tuple[str, str, str]] = {}


@contextmanager
def criterion(number: int, title: str):
    notes: list[str] = []
    try:
        yield notes
    except BaseException as exc:
        RESULTS[number] = ("FAIL", title, "; ".join(notes + [f"{type(exc).__name__}: {exc}".splitlines()[0]]))
        raise
    RESULTS[number] = ("PASS", title, "; ".join(notes))


def lines() -> list[str]:
    return [f"[{status}] criterion {n}: {title}" + (f" ({detail})" if detail else "")
            for n, (status, title, detail) in sorted(RESULTS.items())]
