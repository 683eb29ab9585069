"""Shared fixtures for the cavity2sat test suite."""

import sys
from pathlib import Path

import pytest

sys.path.append(str(Path(__file__).resolve().parent.parent))

from cavity2sat.formula import Clause, Formula  # noqa: E402


@pytest.fixture
def single_clause():
    """(x0 v x1)"""
    return Formula(2, (Clause.of(1, 2),))


@pytest.fixture
def forcing_pair():
    """(x0 v x1) ^ (x0 v -x1): x0 must be true"""
    return Formula(2, (Clause.of(1, 2), Clause.of(1, -2)))


@pytest.fixture
def contradiction():
    """All four clauses on two variables"""
    return Formula(2, (Clause.of(1, 2), Clause.of(-1, 2), Clause.of(1, -2), Clause.of(-1, -2)))


@pytest.fixture
def contradiction_dimacs(tmp_path, contradiction):
    from cavity2sat.formula import emit_dimacs

    path = tmp_path / "contradiction.cnf"
    path.write_text(emit_dimacs(contradiction))
    return path
