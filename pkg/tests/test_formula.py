"""Tests for formulas, factor graphs, sampling and DIMACS I/O."""

import numpy as np
import pytest

from cavity2sat.errors import DimacsParseError, FormulaError, OutOfRegime
from cavity2sat.formula import (Clause, FactorGraph, Formula, Literal, components, emit_dimacs,
                                neighborhood, parse_dimacs, permute_variables, restrict, sample_coupled,
                                sample_formula, validate_assignment)


class TestTypes:

    def test_literal_rejects_zero_sign(self):
        with pytest.raises(FormulaError):
            Literal(0, 0)

    def test_clause_rejects_repeated_variable(self):
        with pytest.raises(FormulaError):
            Clause.of(3, -3)

    def test_formula_rejects_out_of_range(self):
        with pytest.raises(FormulaError):
            Formula(2, (Clause.of(1, 3),))

    def test_arrays(self, forcing_pair):
        np.testing.assert_array_equal(forcing_pair.var_array, [[0, 1], [0, 1]])
        np.testing.assert_array_equal(forcing_pair.sign_array, [[1, 1], [1, -1]])

    def test_satisfaction(self, single_clause):
        assert single_clause.is_satisfied_by({0: 1, 1: -1})
        assert not single_clause.is_satisfied_by({0: -1, 1: -1})

    def test_json_form(self, forcing_pair):
        assert Formula.from_json(forcing_pair.to_json()) == forcing_pair

    def test_assignment_validation(self):
        with pytest.raises(FormulaError):
            validate_assignment({5: 1}, 3)
        with pytest.raises(FormulaError):
            validate_assignment({0: 0}, 3)


class TestFactorGraph:

    def test_edges(self):
        f = Formula(3, (Clause.of(1, 2), Clause.of(1, -3)))
        g = FactorGraph(f)
        assert g.num_edges == 4
        np.testing.assert_array_equal(g.clauses_of(0), [0, 1])
        np.testing.assert_array_equal(g.degree(), [2, 1, 1])
        assert g.neighbors(0) == [1, 2]
        np.testing.assert_array_equal(g.edge_partner, [1, 0, 3, 2])

    def test_empty(self):
        g = FactorGraph(Formula(4))
        assert g.num_edges == 0
        np.testing.assert_array_equal(g.degree(), [0, 0, 0, 0])


class TestSampling:

    def test_deterministic(self):
        assert sample_formula(200, 1.2, seed=7) == sample_formula(200, 1.2, seed=7)

    def test_indices_give_distinct_draws(self):
        assert sample_formula(200, 1.2, seed=7, index=0) != sample_formula(200, 1.2, seed=7, index=1)

    def test_zero_density(self):
        assert sample_formula(50, 0.0, seed=1).m == 0

    def test_rejects_bad_parameters(self):
        with pytest.raises(FormulaError):
            sample_formula(1, 0.5, seed=0)
        with pytest.raises(FormulaError):
            sample_formula(10, -0.1, seed=0)

    def test_clause_count_mean(self):
        counts = [sample_formula(1000, 1.2, seed=3, index=i).m for i in range(50)]
        # Poisson(600): standard error of the mean is sqrt(600 / 50)
        assert abs(np.mean(counts) - 600) < 4 * np.sqrt(600 / 50)

    def test_signs_balanced(self):
        f = sample_formula(5000, 1.0, seed=11)
        signs = f.sign_array.astype(float)
        assert abs(signs.mean()) < 4 / np.sqrt(signs.size)


class TestCoupled:

    def test_shared_prefix(self):
        triple = sample_coupled(40, 1.0, seed=5)
        m = triple.base.m
        assert triple.grown.clauses[:m] == triple.base.clauses
        assert triple.extended.clauses[:m] == triple.base.clauses
        assert triple.grown.n == 40
        assert triple.extended.n == 41

    def test_extended_clauses_touch_new_variable(self):
        for index in range(20):
            triple = sample_coupled(30, 1.5, seed=2, index=index)
            for clause in triple.added_to_extended:
                assert triple.new_variable in clause.variables()
            for clause in triple.added_to_grown:
                assert triple.new_variable not in clause.variables()


    def test_new_variable_clause_count(self):
        counts = [len(sample_coupled(100, 1.0, seed=8, index=i).added_to_extended) for i in range(2000)]
        assert np.mean(counts) == pytest.approx(1.0, abs=0.1)

    @pytest.mark.slow
    def test_new_variable_clause_count_full(self):
        counts = [len(sample_coupled(100, 1.0, seed=9, index=i).added_to_extended) for i in range(10_000)]
        assert np.mean(counts) == pytest.approx(1.0, abs=0.05)

    def test_two_variables(self):
        triple = sample_coupled(2, 1e-9, seed=3)
        assert triple.base.m == triple.grown.m == triple.extended.m == 0
        assert triple.extended.n == 3
        for index in range(20):
            triple = sample_coupled(2, 1.5, seed=4, index=index)
            assert all(set(c.variables()) == {0, 1} for c in triple.grown.clauses)
            assert all(2 in c.variables() for c in triple.added_to_extended)

    @pytest.mark.parametrize("d", [2.0, 3.5])
    def test_out_of_regime(self, d):
        with pytest.raises(OutOfRegime):
            sample_coupled(10, d, seed=0)


class TestComponents:

    def test_partition_of_random_formulas(self):
        for index in range(30):
            f = sample_formula(80, 0.4 + 0.05 * index, seed=12, index=index)
            comps = components(f)
            variables = sorted(v for c in comps for v in c.variables)
            clauses = sorted(a for c in comps for a in c.clauses)
            assert variables == list(range(f.n))
            assert clauses == list(range(f.m))
            assert [c.variables[0] for c in comps] == sorted(c.variables[0] for c in comps)
            for comp in comps:
                assert all(set(f.clauses[a].variables()) <= set(comp.variables) for a in comp.clauses)
                assert len(components(restrict(f, comp.variables, comp.clauses))) == 1

    def test_empty_formula(self):
        assert [c.variables for c in components(Formula(5))] == [(0,), (1,), (2,), (3,), (4,)]

    def test_order_and_membership(self):
        f = Formula(6, (Clause.of(5, 6), Clause.of(1, 3), Clause.of(3, -4)))
        comps = components(f)
        assert [c.variables for c in comps] == [(0, 2, 3), (1,), (4, 5)]
        assert comps[0].clauses == (1, 2)
        assert comps[1].clauses == ()
        assert comps[2].clauses == (0,)


class TestNeighborhood:

    def test_path(self):
        # x0 - c0 - x1 - c1 - x2
        f = Formula(3, (Clause.of(1, 2), Clause.of(2, 3)))
        nb = neighborhood(f, 0, 2)
        assert nb.variables == (0, 1)
        assert nb.clause_ids == (0,)
        assert nb.boundary == frozenset({1})
        assert nb.formula.m == 1

    def test_odd_radius_truncates(self):
        f = Formula(3, (Clause.of(1, 2), Clause.of(2, -3)))
        nb = neighborhood(f, 1, 1)
        assert nb.variables == (1,)
        assert nb.formula.m == 0
        assert [lit for _, lit in nb.truncated] == [Literal(0, 1), Literal(0, 1)]

    def test_odd_radius_boundary_is_last_variable_layer(self):
        f = Formula(3, (Clause.of(1, 2), Clause.of(2, 3)))
        nb = neighborhood(f, 0, 3)
        assert nb.variables == (0, 1)
        assert nb.clause_ids == (0, 1)
        assert nb.boundary == frozenset({1})
        assert [lit for _, lit in nb.truncated] == [Literal(1, 1)]

    def test_monotone_and_inside_component(self):
        for index in range(10):
            f = sample_formula(60, 1.2, seed=14, index=index)
            owner = {v: comp for comp in components(f) for v in comp.variables}
            x = index % f.n
            previous = set()
            for radius in range(0, 2 * f.n + 2):
                nb = neighborhood(f, x, radius)
                assert previous <= set(nb.variables)
                assert set(nb.variables) <= set(owner[x].variables)
                assert set(nb.clause_ids) <= set(owner[x].clauses)
                previous = set(nb.variables)
            assert previous == set(owner[x].variables)

    def test_radius_zero(self):
        nb = neighborhood(Formula(3, (Clause.of(1, 2),)), 0, 0)
        assert nb.variables == (0,)
        assert nb.boundary == frozenset({0})


class TestDimacs:

    def test_parse(self):
        f = parse_dimacs("c comment\np cnf 3 2\n1 -2 0\n-1 3 0\n")
        assert f == Formula(3, (Clause.of(1, -2), Clause.of(-1, 3)))

    def test_emit_then_parse(self, contradiction):
        text = emit_dimacs(contradiction)
        assert text.startswith("p cnf 2 4\n")
        assert parse_dimacs(text) == contradiction

    @pytest.mark.parametrize("text, fragment", [
        ("1 2 0\n", "header"),
        ("p cnf 3 1\n1 2 3 0\n", "width 3"),
        ("p cnf 3 1\n2 -2 0\n", "repeated variable"),
        ("p cnf 2 1\n1 3 0\n", "out of range"),
        ("p cnf 2 1\n1 2\n", "end with 0"),
        ("p cnf 2 2\n1 2 0\n", "declares 2"),
    ])
    def test_errors(self, text, fragment):
        with pytest.raises(DimacsParseError, match=fragment):
            parse_dimacs(text)

    def test_error_carries_line(self):
        with pytest.raises(DimacsParseError) as info:
            parse_dimacs("p cnf 3 2\n1 2 0\n1 1 0\n")
        assert info.value.line_no == 3


class TestPermutation:

    def test_relabels(self):
        f = Formula(3, (Clause.of(1, -3),))
        g = permute_variables(f, [2, 0, 1])
        assert g.clauses == (Clause.of(3, -2),)

    def test_rejects_non_permutation(self):
        with pytest.raises(FormulaError):
            permute_variables(Formula(2), [0, 0])
