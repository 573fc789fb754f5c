from pathlib import Path

import pytest
from hypothesis import strategies as st

from dirreason.cli import data_path
from dirreason.logic import Atom, Literal, Rule
from dirreason.parsing import load_dataset, parse_literal
from dirreason.prompts import load_exemplars

FIXTURES = Path(__file__).parent / "fixtures"

SUBJECTS = ["Bob", "Anne", "cat", "dog", "weather", "x"]
PREDICATES = ["big", "red", "fine", "kind", "drives_to_work", "likes_the_cat", "young"]


def atoms_st(subjects=SUBJECTS, predicates=PREDICATES):
    return st.builds(Atom, st.sampled_from(subjects), st.sampled_from(predicates))


def literals_st(**kw):
    return st.builds(Literal, atoms_st(**kw), st.booleans())


@st.composite
def rules_st(draw, max_antecedents=3, **kw):
    head = draw(literals_st(**kw))
    n = draw(st.integers(1, max_antecedents))
    body = draw(st.lists(literals_st(**kw), min_size=n, max_size=n, unique=True)
                .filter(lambda b: head not in b))
    return Rule(tuple(body), head)


@pytest.fixture(scope="session")
def demo():
    return load_dataset(data_path("demo"))


@pytest.fixture(scope="session")
def proofmath():
    return load_dataset(data_path("proofmath"))


@pytest.fixture(scope="session")
def exemplars():
    return load_exemplars(data_path("exemplars"))


@pytest.fixture
def lit():
    return parse_literal


def pytest_terminal_summary(terminalreporter):
    from .acceptance_log import lines

    out = lines()
    if out:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in out:
            terminalreporter.write_line(line)
