#!/usr/bin/env python3
"""
Exact counting oracle.

Z(f), conditional counts Z(f, chi), exact marginals and the soft partition
function ln Z_beta are computed per connected component of the factor graph.

Components of at most ENUM_BITS variables are enumerated bit-parallel: 64
assignments share one uint64 word, bit b of word w being the assignment
w * 64 + b (local variable i set = +1 when bit i of that integer is set).
Each clause is evaluated over a whole chunk of words with precomputed literal
masks. Larger components are conditioned on the variable whose removal leaves
the smallest largest sub-component, split and solved recursively.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import ComponentTooLarge, FormulaError, Unsatisfiable
from .formula import Assignment, Component, Formula, components, validate_assignment
from .rng import parallel_map

logger = logging.getLogger(__name__)

DEFAULT_CAP = 30
ENUM_BITS = 20
WORD_BITS = 6
CHUNK_WORDS = 1 << 14

_ALL = np.uint64(0xFFFFFFFFFFFFFFFF)
# bit b of _LOW_PATTERNS[j] is bit j of b
_LOW_PATTERNS = np.array([0xAAAAAAAAAAAAAAAA, 0xCCCCCCCCCCCCCCCC, 0xF0F0F0F0F0F0F0F0,
                          0xFF00FF00FF00FF00, 0xFFFF0000FFFF0000, 0xFFFFFFFF00000000], dtype=np.uint64)
_POPCOUNT8 = np.array([bin(i).count('1') for i in range(256)], dtype=np.int64)


@dataclass(frozen=True)
class CountResult:
    """Exact model count with its truncated log"""
    z: int
    log_z: float

    @classmethod
    def of(cls, z: int) -> "CountResult":
        z = int(z)
        return cls(z=z, log_z=math.log(z) if z > 1 else 0.0)

    def to_dict(self) -> Dict[str, object]:
        # z as a decimal string: it routinely exceeds 2^53
        return {"z": str(self.z), "log_z": self.log_z}


@dataclass(frozen=True)
class MarginalTable:
    """Exact marginals p_x = mu(sigma_x = +1)"""
    p: np.ndarray
    z: int

    def __getitem__(self, x: int) -> float:
        return float(self.p[x])

    def __len__(self) -> int:
        return len(self.p)


@dataclass
class _Tally:
    count: int = 0
    positives: Optional[np.ndarray] = None
    violations: Optional[np.ndarray] = None


@dataclass(frozen=True)
class _Block:
    """
    One component on local variables 0..k-1.

    `lits` and `signs` are (m, 2) arrays; a unit clause repeats its literal in
    both columns. `variables` maps local index -> index in the enclosing frame.
    """
    index: int
    k: int
    lits: np.ndarray
    signs: np.ndarray
    variables: Tuple[int, ...]

    @property
    def m(self) -> int:
        return len(self.lits)


def _popcount(words: np.ndarray) -> np.ndarray:
    words = np.ascontiguousarray(words)
    return _POPCOUNT8[words.view(np.uint8)].reshape(words.shape + (8,)).sum(axis=-1)


def _variable_words(k: int, lo: int, count: int) -> np.ndarray:
    """(k, count) truth tables of the local variables over words lo..lo+count-1"""
    words = np.empty((k, count), dtype=np.uint64)
    low = min(k, WORD_BITS)
    words[:low] = _LOW_PATTERNS[:low, None]
    if k > WORD_BITS:
        w = np.arange(lo, lo + count, dtype=np.uint64)
        shifts = np.arange(k - WORD_BITS, dtype=np.uint64)[:, None]
        words[WORD_BITS:] = ((w >> shifts) & np.uint64(1)) * _ALL
    return words


def _violation_histogram(violated: np.ndarray, valid: np.uint64) -> np.ndarray:
    """Per-assignment count of set rows, tallied into a histogram via a bit-sliced counter"""
    m, count = violated.shape
    planes = [np.zeros(count, dtype=np.uint64) for _ in range(max(m, 1).bit_length())]
    for row in violated:
        carry = row
        for b, plane in enumerate(planes):
            planes[b] = plane ^ carry
            carry = plane & carry
    hist = np.zeros(m + 1, dtype=np.int64)
    for t in range(m + 1):
        match = np.full(count, valid, dtype=np.uint64)
        for b, plane in enumerate(planes):
            match &= plane if (t >> b) & 1 else ~plane
        hist[t] = int(_popcount(match).sum())
    return hist


def _enumerate(block: _Block, positives: bool = False, histogram: bool = False) -> _Tally:
    k, m = block.k, block.m
    total_words = 1 << max(k - WORD_BITS, 0)
    valid = _ALL if k >= WORD_BITS else np.uint64((1 << (1 << k)) - 1)
    # literal true <=> variable word XOR flip has the bit set
    flips = np.where(block.signs > 0, np.uint64(0), _ALL)

    tally = _Tally(
        positives=np.zeros(k, dtype=np.int64) if positives else None,
        violations=np.zeros(m + 1, dtype=np.int64) if histogram else None,
    )
    for lo in range(0, total_words, CHUNK_WORDS):
        count = min(CHUNK_WORDS, total_words - lo)
        words = _variable_words(k, lo, count)
        if m:
            sat = (words[block.lits[:, 0]] ^ flips[:, 0, None]) | (words[block.lits[:, 1]] ^ flips[:, 1, None])
            ok = np.bitwise_and.reduce(sat, axis=0) & valid
        else:
            sat = np.zeros((0, count), dtype=np.uint64)
            ok = np.full(count, valid, dtype=np.uint64)
        if histogram:
            tally.violations += _violation_histogram(~sat, valid)
        tally.count += int(_popcount(ok).sum())
        if positives:
            tally.positives += _popcount(words & ok).sum(axis=1)
    return tally


def _split(k: int, lits: np.ndarray, signs: np.ndarray, variables: np.ndarray) -> List[_Block]:
    """Connected pieces of a clause system on k variables"""
    graph = sparse.coo_matrix((np.ones(len(lits)), (lits[:, 0], lits[:, 1])), shape=(k, k))
    count, labels = csgraph.connected_components(graph, directed=False)
    clause_labels = labels[lits[:, 0]]
    blocks = []
    for c in range(count):
        members = np.flatnonzero(labels == c)
        local = np.full(k, -1, dtype=np.int64)
        local[members] = np.arange(members.size)
        rows = clause_labels == c
        blocks.append(_Block(c, int(members.size), local[lits[rows]], signs[rows],
                             tuple(variables[members].tolist())))
    return blocks


def _split_variable(block: _Block) -> int:
    """Variable whose removal minimises the largest remaining piece; ties go to higher degree"""
    ends = block.lits[block.lits[:, 0] != block.lits[:, 1]]
    degree = np.bincount(ends.reshape(-1), minlength=block.k)
    best, best_size = 0, None
    for v in np.argsort(-degree, kind='stable').tolist():
        keep = (ends != v).all(axis=1)
        graph = sparse.coo_matrix((np.ones(int(keep.sum())), (ends[keep, 0], ends[keep, 1])),
                                  shape=(block.k, block.k))
        _, labels = csgraph.connected_components(graph, directed=False)
        sizes = np.bincount(labels)
        sizes[labels[v]] -= 1
        largest = int(sizes.max())
        if best_size is None or largest < best_size:
            best, best_size = v, largest
    return best


def _condition(block: _Block, v: int, value: int) -> Tuple[int, List[_Block]]:
    """
    Fix local variable v to value.

    Returns the number of clauses this violates outright and the remaining
    system split into pieces; a clause whose v-literal is false shrinks to a
    unit clause on its other literal.
    """
    touches = block.lits == v
    hit = touches.any(axis=1)
    satisfied = (touches & (block.signs == value)).any(axis=1)
    shrunk = hit & ~satisfied
    both = touches.all(axis=1)
    offset = int((shrunk & both).sum())

    rows = np.flatnonzero(shrunk & ~both)
    other = np.where(touches[rows, 0], 1, 0)
    unit_lits = block.lits[rows, other]
    unit_signs = block.signs[rows, other]
    lits = np.concatenate([block.lits[~hit], np.stack([unit_lits, unit_lits], axis=1)])
    signs = np.concatenate([block.signs[~hit], np.stack([unit_signs, unit_signs], axis=1)])
    lits = np.where(lits > v, lits - 1, lits)
    rest = np.delete(np.arange(block.k), v)
    return offset, _split(block.k - 1, lits, signs, rest)


def _solve(block: _Block, positives: bool = False, histogram: bool = False) -> _Tally:
    if block.k <= ENUM_BITS:
        return _enumerate(block, positives, histogram)
    v = _split_variable(block)
    tally = _Tally(
        positives=np.zeros(block.k, dtype=np.int64) if positives else None,
        violations=np.zeros(block.m + 1, dtype=np.int64) if histogram else None,
    )
    for value in (1, -1):
        offset, parts = _condition(block, v, value)
        if offset and not histogram:
            continue
        subs = [_solve(part, positives, histogram) for part in parts]
        if histogram:
            hist = np.ones(1, dtype=np.int64)
            for sub in subs:
                hist = np.convolve(hist, sub.violations)
            tally.violations[offset:offset + hist.size] += hist
            continue
        counts = [sub.count for sub in subs]
        branch = math.prod(counts)
        tally.count += branch
        if positives and branch:
            for part, sub, c in zip(parts, subs, counts):
                tally.positives[list(part.variables)] += sub.positives * (branch // c)
            if value == 1:
                tally.positives[v] += branch
    if histogram:
        tally.count = int(tally.violations[0])
    return tally


def _block_of(f: Formula, index: int, comp: Component, chi: Mapping[int, int]) -> _Block:
    local = np.full(f.n, -1, dtype=np.int64)
    local[list(comp.variables)] = np.arange(len(comp.variables))
    clause_ids = list(comp.clauses)
    lits = local[f.var_array[clause_ids]].reshape(-1, 2)
    signs = f.sign_array[clause_ids].reshape(-1, 2)
    fixed = sorted(v for v in chi if local[v] >= 0)
    if fixed:
        # conditioning enters as hard unit clauses
        unit_lits = np.repeat(local[fixed][:, None], 2, axis=1)
        unit_signs = np.repeat(np.array([chi[v] for v in fixed], dtype=np.int8)[:, None], 2, axis=1)
        lits = np.concatenate([lits, unit_lits])
        signs = np.concatenate([signs, unit_signs])
    return _Block(index, len(comp.variables), lits, signs, comp.variables)


def _blocks(f: Formula, cap: int, chi: Optional[Mapping[int, int]] = None) -> List[_Block]:
    chi = chi or {}
    comps: List[Component] = components(f)
    for i, comp in enumerate(comps):
        if len(comp.variables) > cap:
            raise ComponentTooLarge(i, len(comp.variables), cap)
    return [_block_of(f, i, comp, chi) for i, comp in enumerate(comps)]


def _free_isolated(block: _Block) -> bool:
    return block.k == 1 and block.m == 0


def count_conditional(f: Formula, chi: Assignment, cap: int = DEFAULT_CAP,
                      threads: int = 1) -> CountResult:
    """Number of satisfying assignments agreeing with chi on its domain"""
    chi = validate_assignment(chi, f.n)
    blocks = _blocks(f, cap, chi)
    isolated = sum(1 for b in blocks if _free_isolated(b))
    work = [b for b in blocks if not _free_isolated(b)]
    tallies = parallel_map(_solve, work, threads)
    z = 1 << isolated
    for tally in tallies:
        z *= tally.count
        if z == 0:
            break
    logger.debug(f"Counted {len(work)} components (+{isolated} isolated): z={z}")
    return CountResult.of(z)


def count_exact(f: Formula, cap: int = DEFAULT_CAP, threads: int = 1) -> CountResult:
    """Z(f) as the product of per-component counts times 2^isolated"""
    return count_conditional(f, {}, cap=cap, threads=threads)


def count_single_block(f: Formula, max_vars: int = 24) -> CountResult:
    """Brute force over all 2^n assignments at once, ignoring components"""
    if f.n > max_vars:
        raise FormulaError(f"single-block enumeration limited to {max_vars} variables (n = {f.n})")
    if f.n == 0:
        return CountResult.of(1)
    block = _Block(0, f.n, f.var_array, f.sign_array, tuple(range(f.n)))
    return CountResult.of(_enumerate(block).count)


def marginals_exact(f: Formula, cap: int = DEFAULT_CAP, threads: int = 1) -> MarginalTable:
    """p_x = Z(f, {x: +1}) / Z(f), per component"""
    blocks = _blocks(f, cap)
    tallies = parallel_map(lambda b: _solve(b, positives=True), blocks, threads)
    p = np.full(f.n, 0.5)
    z = 1
    for block, tally in zip(blocks, tallies):
        if tally.count == 0:
            raise Unsatisfiable(f"component {block.index} has no satisfying assignment")
        z *= tally.count
        for j, v in enumerate(block.variables):
            p[v] = int(tally.positives[j]) / tally.count
    return MarginalTable(p=p, z=z)


def soft_partition(f: Formula, beta: float, cap: int = DEFAULT_CAP, threads: int = 1) -> float:
    """ln sum_sigma exp(-beta * #violated clauses)"""
    if not beta >= 0:
        raise FormulaError(f"beta must be nonnegative (got {beta})")
    blocks = _blocks(f, cap)
    isolated = sum(1 for b in blocks if _free_isolated(b))
    work = [b for b in blocks if not _free_isolated(b)]
    tallies = parallel_map(lambda b: _solve(b, histogram=True), work, threads)

    log_z = isolated * math.log(2.0)
    for tally in tallies:
        hist = tally.violations
        k = np.nonzero(hist)[0]
        if math.isinf(beta):
            if hist[0] == 0:
                return -math.inf
            log_z += math.log(int(hist[0]))
            continue
        terms = np.log(hist[k].astype(np.float64)) - beta * k
        log_z += float(np.logaddexp.reduce(terms))
    return log_z
