import itertools

import pytest

from dirreason.kbgen import (
    _rule_shapes,
    _symmetries,
    atoms,
    enumerate_family,
    fact_sets,
    iter_family,
    literals,
    rule_set_orbits,
)


def naive_orbits(n, size):
    """Count orbits by canonicalizing every rule set in plain Python."""
    shapes = _rule_shapes(n)
    index = {s: i for i, s in enumerate(shapes)}
    syms = _symmetries(n).tolist()

    def canon(combo):
        best = None
        for sym in syms:
            img = tuple(sorted(index[(tuple(sorted(sym[a] for a in shapes[i][0])), sym[shapes[i][1]])]
                               for i in combo))
            best = img if best is None or img < best else best
        return best

    return {canon(c) for c in itertools.combinations(range(len(shapes)), size)}


class TestShapes:
    def test_counts(self):
        # per consequent: 2n-1 single antecedents, C(2n-1, 2) pairs
        for n in (2, 3, 4):
            k = 2 * n - 1
            assert len(_rule_shapes(n)) == 2 * n * (k + k * (k - 1) // 2)

    def test_symmetry_group_order(self):
        assert len(_symmetries(3)) == 6 * 8
        assert len(_symmetries(4)) == 24 * 16

    def test_symmetries_preserve_complements(self):
        for sym in _symmetries(3).tolist():
            assert sorted(sym) == list(range(6))
            assert all(sym[2 * i] // 2 == sym[2 * i + 1] // 2 for i in range(3))


class TestOrbits:
    @pytest.mark.parametrize("n,size", [(2, 1), (2, 2), (3, 1), (3, 2)])
    def test_agrees_with_naive(self, n, size):
        assert set(rule_set_orbits(n, size)) == naive_orbits(n, size)

    @pytest.mark.parametrize("n,size,count", [(4, 0, 1), (4, 1, 5), (4, 2, 170), (3, 3, 2763)])
    def test_default_family_counts(self, n, size, count):
        assert len(rule_set_orbits(n, size)) == count

    def test_representatives_are_minimal(self):
        for rep in rule_set_orbits(3, 2):
            assert list(rep) == sorted(rep) and len(set(rep)) == 2


class TestFacts:
    def test_counts(self):
        # sum_k C(n, k) 2^k
        assert len(fact_sets(4, 3)) == 1 + 8 + 24 + 32
        assert len(fact_sets(3, 3)) == 27

    def test_consistent(self):
        for fs in fact_sets(4, 3):
            assert len({l.atom for l in fs}) == len(fs)

    def test_vocabulary(self):
        assert len(set(atoms(4))) == 4
        assert len(literals(3)) == 6


class TestFamily:
    def test_size(self):
        small = ((3, (0, 1), 2),)
        n = sum(1 for _ in iter_family(small))
        assert n == (1 + len(rule_set_orbits(3, 1))) * len(fact_sets(3, 2))

    def test_enumerate_wraps_iter(self):
        small = ((2, (1,), 1),)
        assert list(enumerate_family(small)) == [kb for _, kb in iter_family(small)]

    def test_rules_stay_in_vocabulary(self):
        for n, kb in itertools.islice(iter_family(), 0, None, 997):
            names = set(atoms(n))
            assert all(l.atom in names for r in kb.rules for l in (*r.antecedents, r.consequent))
            assert all(r.consequent not in r.antecedents for r in kb.rules)
