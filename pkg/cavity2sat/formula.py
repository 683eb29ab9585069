#!/usr/bin/env python3
"""
2-SAT formulas, factor graphs and random ensembles.

Variables are 0-based integers, signs are +1 (positive literal) or -1 (negated).
Clause sampling draws ordered pairs of distinct variables with independent
signs, which reproduces the 4n(n-1) clause set of the random 2-SAT model;
duplicate clauses are kept.
"""

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import DimacsParseError, FormulaError, OutOfRegime
from .rng import random_signs, stream

logger = logging.getLogger(__name__)

Assignment = Mapping[int, int]


@dataclass(frozen=True)
class Literal:
    """Variable index together with the sign it carries in a clause"""
    var: int
    sign: int

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise FormulaError(f"literal sign must be +1 or -1 (got {self.sign})")
        if self.var < 0:
            raise FormulaError(f"variable index must be nonnegative (got {self.var})")

    def satisfied_by(self, value: int) -> bool:
        return value == self.sign

    def to_dimacs(self) -> int:
        return self.sign * (self.var + 1)

    @classmethod
    def from_dimacs(cls, token: int) -> "Literal":
        if token == 0:
            raise FormulaError("0 is not a literal")
        return cls(abs(token) - 1, 1 if token > 0 else -1)


@dataclass(frozen=True)
class Clause:
    """Disjunction of two literals over distinct variables"""
    first: Literal
    second: Literal

    def __post_init__(self):
        if self.first.var == self.second.var:
            raise FormulaError(f"clause repeats variable {self.first.var}")

    @property
    def literals(self) -> Tuple[Literal, Literal]:
        return (self.first, self.second)

    def variables(self) -> Tuple[int, int]:
        return (self.first.var, self.second.var)

    def sign_of(self, var: int) -> int:
        if self.first.var == var:
            return self.first.sign
        if self.second.var == var:
            return self.second.sign
        raise KeyError(var)

    def other(self, var: int) -> Literal:
        if self.first.var == var:
            return self.second
        if self.second.var == var:
            return self.first
        raise KeyError(var)

    @classmethod
    def of(cls, a: int, b: int) -> "Clause":
        """Build from two DIMACS-style signed 1-based literals"""
        return cls(Literal.from_dimacs(a), Literal.from_dimacs(b))


@dataclass(frozen=True)
class Formula:
    """2-SAT formula on variables 0..n-1"""
    n: int
    clauses: Tuple[Clause, ...] = ()

    def __post_init__(self):
        if self.n < 0:
            raise FormulaError(f"variable count must be nonnegative (got {self.n})")
        object.__setattr__(self, "clauses", tuple(self.clauses))
        for i, clause in enumerate(self.clauses):
            for lit in clause.literals:
                if lit.var >= self.n:
                    raise FormulaError(f"clause {i} uses variable {lit.var} but n = {self.n}")

    @property
    def m(self) -> int:
        return len(self.clauses)

    @cached_property
    def var_array(self) -> np.ndarray:
        """(m, 2) variable indices"""
        if not self.clauses:
            return np.zeros((0, 2), dtype=np.int64)
        return np.array([[c.first.var, c.second.var] for c in self.clauses], dtype=np.int64)

    @cached_property
    def sign_array(self) -> np.ndarray:
        """(m, 2) signs as int8"""
        if not self.clauses:
            return np.zeros((0, 2), dtype=np.int8)
        return np.array([[c.first.sign, c.second.sign] for c in self.clauses], dtype=np.int8)

    def is_satisfied_by(self, values: Assignment) -> bool:
        """True when every clause has a literal set true (all variables must be assigned)"""
        return all(
            values[c.first.var] == c.first.sign or values[c.second.var] == c.second.sign
            for c in self.clauses
        )

    def with_clauses(self, extra: Iterable[Clause], n: Optional[int] = None) -> "Formula":
        return Formula(self.n if n is None else n, self.clauses + tuple(extra))

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n,
            "clauses": [[c.first.to_dimacs(), c.second.to_dimacs()] for c in self.clauses],
        })

    @classmethod
    def from_json(cls, text: str) -> "Formula":
        try:
            raw = json.loads(text)
            return cls(int(raw["n"]), tuple(Clause.of(int(a), int(b)) for a, b in raw["clauses"]))
        except (KeyError, TypeError, ValueError) as e:
            raise FormulaError(f"invalid formula JSON: {e}")

    @classmethod
    def from_arrays(cls, n: int, variables: np.ndarray, signs: np.ndarray) -> "Formula":
        clauses = tuple(
            Clause(Literal(int(v0), int(s0)), Literal(int(v1), int(s1)))
            for (v0, v1), (s0, s1) in zip(variables.tolist(), signs.tolist())
        )
        return cls(n, clauses)


def validate_assignment(values: Assignment, n: int) -> Dict[int, int]:
    """Check a (partial) assignment against n variables, return a plain dict"""
    checked = {}
    for var, value in values.items():
        var = int(var)
        if not 0 <= var < n:
            raise FormulaError(f"assignment variable {var} out of range for n = {n}")
        if value not in (1, -1):
            raise FormulaError(f"assignment value for {var} must be +1 or -1 (got {value})")
        checked[var] = int(value)
    return checked


class FactorGraph:
    """
    Bipartite clause/variable graph G(f).

    Edge e = 2*a + j joins clause a with its j-th variable; messages in both
    directions are indexed by e. Variable adjacency is stored in CSR form.
    """

    def __init__(self, formula: Formula):
        self.formula = formula
        self.n = formula.n
        self.m = formula.m
        self.edge_var = formula.var_array.reshape(-1)
        self.edge_sign = formula.sign_array.reshape(-1).astype(np.float64)
        # partner edge: the other end of the same clause
        self.edge_partner = np.arange(2 * self.m) ^ 1
        order = np.argsort(self.edge_var, kind='stable')
        self.var_edges = order
        counts = np.bincount(self.edge_var, minlength=self.n)
        self.var_ptr = np.concatenate(([0], np.cumsum(counts)))

    @property
    def num_edges(self) -> int:
        return 2 * self.m

    def edges_of(self, var: int) -> np.ndarray:
        return self.var_edges[self.var_ptr[var]:self.var_ptr[var + 1]]

    def clauses_of(self, var: int) -> np.ndarray:
        return self.edges_of(var) // 2

    def degree(self) -> np.ndarray:
        return np.diff(self.var_ptr)

    def neighbors(self, var: int) -> List[int]:
        """Variables at distance two"""
        return [int(v) for v in self.edge_var[self.edges_of(var) ^ 1]]


@dataclass(frozen=True)
class CoupledTriple:
    """Formulas Phi' (base), Phi'' (grown) and Phi''' (extended) sharing a prefix"""
    base: Formula
    grown: Formula
    extended: Formula

    @property
    def new_variable(self) -> int:
        return self.base.n

    @property
    def added_to_grown(self) -> Tuple[Clause, ...]:
        return self.grown.clauses[self.base.m:]

    @property
    def added_to_extended(self) -> Tuple[Clause, ...]:
        return self.extended.clauses[self.base.m:]


@dataclass(frozen=True)
class Component:
    variables: Tuple[int, ...]
    clauses: Tuple[int, ...]


@dataclass(frozen=True)
class Neighborhood:
    """
    Sub-formula within distance `radius` of a root variable.

    Variables are relabelled 0..k-1 in increasing original order; `variables`
    maps new index -> original index. Clauses whose second endpoint lies beyond
    the radius survive as unit clauses in `truncated`.
    """
    root: int
    radius: int
    formula: Formula
    variables: Tuple[int, ...]
    clause_ids: Tuple[int, ...]
    truncated: Tuple[Tuple[int, Literal], ...]
    distance: Dict[int, int] = field(default_factory=dict)

    @property
    def boundary(self) -> FrozenSet[int]:
        """
        Original indices of the outermost variable layer.

        Variables sit at even distances from the root, so for odd `radius` the
        layer is at distance radius - 1.
        """
        layer = self.radius - self.radius % 2
        return frozenset(v for v, dist in self.distance.items() if dist == layer)


def _check_params(n: int, d: float) -> None:
    if n < 1:
        raise FormulaError(f"n must be positive (got {n})")
    if d < 0:
        raise FormulaError(f"d must be nonnegative (got {d})")
    if n < 2 and d > 0:
        raise FormulaError("n must be at least 2 when d > 0")


def _uniform_clauses(rng: np.random.Generator, n: int, m: int) -> Tuple[np.ndarray, np.ndarray]:
    first = rng.integers(0, n, size=m)
    second = rng.integers(0, n - 1, size=m) if n > 1 else np.zeros(m, dtype=np.int64)
    second = second + (second >= first)
    signs = random_signs(rng, (m, 2))
    return np.stack([first, second], axis=1), signs


def sample_formula(n: int, d: float, seed: int, index: int = 0) -> Formula:
    """Random 2-SAT formula with Poisson(dn/2) uniform clauses; index selects one of many draws"""
    _check_params(n, d)
    rng = stream(seed, "formula", index)
    m = int(rng.poisson(d * n / 2.0))
    variables, signs = _uniform_clauses(rng, n, m)
    logger.debug(f"Sampled formula n={n} d={d} m={m}")
    return Formula.from_arrays(n, variables, signs)


def sample_coupled(n: int, d: float, seed: int, index: int = 0) -> CoupledTriple:
    """Coupled (Phi', Phi'', Phi''') for the n -> n+1 increment"""
    OutOfRegime.check(d)
    _check_params(n, d)
    if n < 2:
        raise FormulaError("coupled sampling needs n >= 2")

    rng_base = stream(seed, "coupled", index, "base")
    m_base = int(rng_base.poisson(d * n / 2.0 - d / 2.0))
    base_vars, base_signs = _uniform_clauses(rng_base, n, m_base)
    base = Formula.from_arrays(n, base_vars, base_signs)

    rng_grow = stream(seed, "coupled", index, "grown")
    delta_grown = int(rng_grow.poisson(d / 2.0))
    grow_vars, grow_signs = _uniform_clauses(rng_grow, n, delta_grown)
    grown = base.with_clauses(Formula.from_arrays(n, grow_vars, grow_signs).clauses)

    rng_ext = stream(seed, "coupled", index, "extended")
    delta_ext = int(rng_ext.poisson(d))
    others = rng_ext.integers(0, n, size=delta_ext)
    new_first = rng_ext.integers(0, 2, size=delta_ext).astype(bool)
    ext_signs = random_signs(rng_ext, (delta_ext, 2))
    ext_vars = np.where(new_first[:, None],
                        np.stack([np.full(delta_ext, n), others], axis=1),
                        np.stack([others, np.full(delta_ext, n)], axis=1))
    extended = base.with_clauses(Formula.from_arrays(n + 1, ext_vars, ext_signs).clauses, n=n + 1)

    return CoupledTriple(base=base, grown=grown, extended=extended)


def factor_graph_matrix(f: Formula) -> sparse.csr_matrix:
    """G(f) as a sparse adjacency matrix: variable v is node v, clause a is node n + a"""
    rows = f.var_array.reshape(-1)
    cols = f.n + np.repeat(np.arange(f.m), 2)
    size = f.n + f.m
    return sparse.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(size, size)).tocsr()


def components(f: Formula) -> List[Component]:
    """Connected components of G(f), ordered by smallest variable"""
    if f.n == 0:
        return []
    ends = f.var_array
    graph = sparse.coo_matrix((np.ones(f.m), (ends[:, 0], ends[:, 1])), shape=(f.n, f.n))
    count, labels = csgraph.connected_components(graph, directed=False)

    smallest = np.full(count, f.n)
    np.minimum.at(smallest, labels, np.arange(f.n))
    rank = np.empty(count, dtype=np.int64)
    rank[np.argsort(smallest)] = np.arange(count)
    labels = rank[labels]
    clause_labels = labels[ends[:, 0]]

    var_order = np.argsort(labels, kind='stable')
    var_cuts = np.searchsorted(labels[var_order], np.arange(count + 1))
    clause_order = np.argsort(clause_labels, kind='stable')
    clause_cuts = np.searchsorted(clause_labels[clause_order], np.arange(count + 1))
    return [
        Component(tuple(var_order[var_cuts[i]:var_cuts[i + 1]].tolist()),
                  tuple(clause_order[clause_cuts[i]:clause_cuts[i + 1]].tolist()))
        for i in range(count)
    ]


def restrict(f: Formula, variables: Sequence[int], clause_ids: Sequence[int]) -> Formula:
    """Sub-formula on the given variables (relabelled in the given order)"""
    index = {v: i for i, v in enumerate(variables)}
    clauses = []
    for cid in clause_ids:
        c = f.clauses[cid]
        clauses.append(Clause(Literal(index[c.first.var], c.first.sign),
                              Literal(index[c.second.var], c.second.sign)))
    return Formula(len(variables), tuple(clauses))


def neighborhood(f: Formula, x: int, radius: int) -> Neighborhood:
    """nabla^radius(f, x) together with the distance map"""
    if not 0 <= x < f.n:
        raise FormulaError(f"variable {x} out of range for n = {f.n}")
    if radius < 0:
        raise FormulaError(f"radius must be nonnegative (got {radius})")

    dist = csgraph.shortest_path(factor_graph_matrix(f), method='D', directed=False,
                                 unweighted=True, indices=x)
    var_dist, clause_dist = dist[:f.n], dist[f.n:]
    kept_vars = tuple(np.flatnonzero(var_dist <= radius).tolist())
    kept_clauses = tuple(np.flatnonzero(clause_dist <= radius).tolist())

    index = {v: i for i, v in enumerate(kept_vars)}
    full, truncated = [], []
    for cid in kept_clauses:
        inside = [lit for lit in f.clauses[cid].literals if lit.var in index]
        if len(inside) == 2:
            full.append(cid)
        else:
            lit = inside[0]
            truncated.append((cid, Literal(index[lit.var], lit.sign)))

    return Neighborhood(
        root=x,
        radius=radius,
        formula=restrict(f, kept_vars, full),
        variables=kept_vars,
        clause_ids=kept_clauses,
        truncated=tuple(truncated),
        distance={v: int(var_dist[v]) for v in kept_vars},
    )


def permute_variables(f: Formula, perm: Sequence[int]) -> Formula:
    """Image of f under the variable relabelling v -> perm[v]"""
    if sorted(perm) != list(range(f.n)):
        raise FormulaError("perm must be a permutation of range(n)")
    return Formula(f.n, tuple(
        Clause(Literal(perm[c.first.var], c.first.sign), Literal(perm[c.second.var], c.second.sign))
        for c in f.clauses
    ))


def parse_dimacs(text: str) -> Formula:
    """Parse width-2 DIMACS CNF"""
    n: Optional[int] = None
    declared_m = 0
    clauses: List[Clause] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('c') or line.startswith('%'):
            continue
        if line.startswith('p'):
            parts = line.split()
            if len(parts) != 4 or parts[1] != 'cnf':
                raise DimacsParseError("header must read 'p cnf <n> <m>'", line_no)
            if n is not None:
                raise DimacsParseError("duplicate header", line_no)
            try:
                n, declared_m = int(parts[2]), int(parts[3])
            except ValueError:
                raise DimacsParseError("header counts must be integers", line_no)
            continue
        if n is None:
            raise DimacsParseError("clause before 'p cnf' header", line_no)
        try:
            tokens = [int(t) for t in line.split()]
        except ValueError:
            raise DimacsParseError(f"non-integer token in '{line}'", line_no)
        if not tokens or tokens[-1] != 0:
            raise DimacsParseError("clause line must end with 0", line_no)
        lits = tokens[:-1]
        if 0 in lits:
            raise DimacsParseError("one clause per line", line_no)
        if len(lits) != 2:
            raise DimacsParseError(f"clause width {len(lits)}, expected 2", line_no)
        if abs(lits[0]) == abs(lits[1]):
            raise DimacsParseError("repeated variable", line_no)
        for lit in lits:
            if abs(lit) > n:
                raise DimacsParseError(f"variable {abs(lit)} out of range 1..{n}", line_no)
        clauses.append(Clause.of(lits[0], lits[1]))

    if n is None:
        raise DimacsParseError("missing 'p cnf' header")
    if declared_m != len(clauses):
        raise DimacsParseError(f"header declares {declared_m} clauses, found {len(clauses)}")
    return Formula(n, tuple(clauses))


def emit_dimacs(f: Formula) -> str:
    lines = [f"p cnf {f.n} {f.m}"]
    lines.extend(f"{c.first.to_dimacs()} {c.second.to_dimacs()} 0" for c in f.clauses)
    return "\n".join(lines) + "\n"
