"""Exhaustive small knowledge-base families for oracle sweeps.

Rule sets are enumerated up to symmetry: renaming atoms and flipping the
polarity of an atom everywhere map a KB to an equivalent one, so only one
rule set per orbit is kept.  Fact sets are not reduced, so every orbit
representative is paired with every consistent fact set.

The default family is the union of

* rule sets of 0-2 rules over 4 atoms, and
* rule sets of exactly 3 rules over 3 atoms,

each rule having one or two antecedents, each paired with every consistent
set of at most 3 facts over the same atoms.
"""

from __future__ import annotations

import itertools
from typing import Iterator

import numpy as np

from .logic import Atom, Literal, Rule
from .reasoner import KnowledgeBase

ATOM_NAMES = "pqrstu"


def atoms(n: int) -> list[Atom]:
    return [Atom("x", ATOM_NAMES[i]) for i in range(n)]


def literals(n: int) -> list[Literal]:
    return [Literal(a, pos) for a in atoms(n) for pos in (True, False)]


def _rule_shapes(n: int) -> list[tuple[tuple[int, ...], int]]:
    """Rules as (sorted antecedent literal codes, consequent code); code = 2*atom + negated."""
    codes = range(2 * n)
    shapes = []
    for c in codes:
        for a in codes:
            if a != c:
                shapes.append(((a,), c))
        for a, b in itertools.combinations(codes, 2):
            if c not in (a, b):
                shapes.append(((a, b), c))
    return shapes


def _symmetries(n: int) -> np.ndarray:
    """Literal-code permutations induced by atom renamings and polarity flips."""
    out = []
    for perm in itertools.permutations(range(n)):
        for flips in itertools.product((0, 1), repeat=n):
            out.append([2 * perm[code // 2] + ((code % 2) ^ flips[code // 2]) for code in range(2 * n)])
    return np.array(out, dtype=np.int64)


def rule_set_orbits(n_atoms: int, size: int) -> list[tuple[int, ...]]:
    """One representative (sorted shape indices) per symmetry orbit of ``size``-rule sets."""
    shapes = _rule_shapes(n_atoms)
    if size == 0:
        return [()]
    index = {s: i for i, s in enumerate(shapes)}
    syms = _symmetries(n_atoms)
    # image[g, i] = index of shape i under symmetry g
    image = np.empty((len(syms), len(shapes)), dtype=np.int64)
    for g, sym in enumerate(syms):
        for i, (ants, c) in enumerate(shapes):
            image[g, i] = index[(tuple(sorted(int(sym[a]) for a in ants)), int(sym[c]))]
    combos = np.array(list(itertools.combinations(range(len(shapes)), size)), dtype=np.int64)
    base = len(shapes)
    weights = base ** np.arange(size - 1, -1, -1, dtype=np.int64)
    own = combos @ weights
    best = own.copy()
    for g in range(len(syms)):
        imgs = np.sort(image[g][combos], axis=1) @ weights
        np.minimum(best, imgs, out=best)
    reps = combos[own == best]
    return [tuple(int(i) for i in row) for row in reps]


def fact_sets(n_atoms: int, max_facts: int) -> list[tuple[Literal, ...]]:
    lits = literals(n_atoms)
    out = []
    for k in range(max_facts + 1):
        for combo in itertools.combinations(lits, k):
            if len({l.atom for l in combo}) == k:
                out.append(combo)
    return out


def _build(n_atoms: int, shape_ids) -> list[Rule]:
    lits = literals(n_atoms)
    shapes = _rule_shapes(n_atoms)
    return [Rule(tuple(lits[a] for a in shapes[i][0]), lits[shapes[i][1]]) for i in shape_ids]


DEFAULT_PARTS = ((4, (0, 1, 2), 3), (3, (3,), 3))


def iter_family(parts=DEFAULT_PARTS) -> Iterator[tuple[int, KnowledgeBase]]:
    """Yield ``(n_atoms, kb)`` for every KB of the family.

    ``parts`` lists ``(n_atoms, rule set sizes, max facts)`` triples.
    """
    for n_atoms, sizes, max_facts in parts:
        facts = fact_sets(n_atoms, max_facts)
        for size in sizes:
            for rep in rule_set_orbits(n_atoms, size):
                rules = _build(n_atoms, rep)
                for fs in facts:
                    yield n_atoms, KnowledgeBase(fs, rules)


def enumerate_family(parts=DEFAULT_PARTS) -> Iterator[KnowledgeBase]:
    for _, kb in iter_family(parts):
        yield kb
