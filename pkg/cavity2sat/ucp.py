#!/usr/bin/env python3
"""
Unit Clause Propagation on 2-SAT formulas.

Starting from an imposed partial assignment chi, any clause with one literal
made false by an imposed value forces the other literal true. The closure
size I_chi is reported as n when propagation ends with a clause whose two
literals are both false.
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Dict, List

from .exact_count import DEFAULT_CAP, count_conditional, count_exact
from .formula import Assignment, FactorGraph, Formula, validate_assignment

logger = logging.getLogger(__name__)

DISCIPLINES = ("fifo", "lifo")


@dataclass(frozen=True)
class UCPResult:
    imposed: Dict[int, int]
    i_chi: int
    contradiction: bool

    @property
    def closure(self) -> List[int]:
        return sorted(self.imposed)


@dataclass(frozen=True)
class FactCheck:
    """Z(f) <= 2^I_chi * (Z(f, chi) v 1)"""
    holds: bool
    z: int
    i_chi: int
    z_chi: int
    contradiction: bool = False

    def to_dict(self) -> Dict[str, object]:
        return {"holds": self.holds, "z": str(self.z), "i_chi": self.i_chi,
                "z_chi": str(self.z_chi), "contradiction": self.contradiction}


def _violated(f: Formula, imposed: Dict[int, int]) -> bool:
    for c in f.clauses:
        a, b = imposed.get(c.first.var), imposed.get(c.second.var)
        if a is not None and b is not None and a != c.first.sign and b != c.second.sign:
            return True
    return False


def unit_clause_propagate(f: Formula, chi: Assignment, discipline: str = "fifo") -> UCPResult:
    """Closure of chi under unit propagation"""
    if discipline not in DISCIPLINES:
        raise ValueError(f"discipline must be one of {DISCIPLINES}")
    imposed = validate_assignment(chi, f.n)
    graph = FactorGraph(f)
    pending = deque(sorted(imposed))
    take = pending.popleft if discipline == "fifo" else pending.pop

    while pending:
        z = take()
        for cid in graph.clauses_of(z).tolist():
            clause = f.clauses[cid]
            if imposed[z] == clause.sign_of(z):
                continue
            other = clause.other(z)
            if other.var not in imposed:
                imposed[other.var] = other.sign
                pending.append(other.var)

    contradiction = _violated(f, imposed)
    i_chi = f.n if contradiction else len(imposed)
    return UCPResult(imposed=imposed, i_chi=i_chi, contradiction=contradiction)


def a_chi(f: Formula, chi: Assignment) -> int:
    """min of I over chi and every start differing from chi in one position"""
    chi = validate_assignment(chi, f.n)
    best = unit_clause_propagate(f, chi).i_chi
    for var in sorted(chi):
        flipped = dict(chi)
        flipped[var] = -chi[var]
        best = min(best, unit_clause_propagate(f, flipped).i_chi)
    return best


def check_fact_uc(f: Formula, chi: Assignment, cap: int = DEFAULT_CAP) -> FactCheck:
    """Z(f) <= 2^I_chi (Z(f, chi) v 1), with the three quantities"""
    result = unit_clause_propagate(f, chi)
    z = count_exact(f, cap).z
    z_chi = count_conditional(f, chi, cap).z
    holds = z <= (1 << result.i_chi) * max(z_chi, 1)
    if not holds:
        logger.error(f"Inequality violated: Z={z} I={result.i_chi} Z(chi)={z_chi}")
    return FactCheck(holds=holds, z=z, i_chi=result.i_chi, z_chi=z_chi,
                     contradiction=result.contradiction)


def parse_impose(text: str) -> Dict[int, int]:
    """'1=-1,3=+1' (1-based DIMACS variables) -> {0: -1, 2: 1}"""
    chi = {}
    for item in filter(None, (part.strip() for part in text.split(','))):
        try:
            var, value = item.split('=')
            var, value = int(var), int(value)
        except ValueError:
            raise ValueError(f"cannot parse imposed value '{item}', expected var=+1 or var=-1")
        if var < 1 or value not in (1, -1):
            raise ValueError(f"cannot parse imposed value '{item}', expected var=+1 or var=-1")
        chi[var - 1] = value
    return chi
