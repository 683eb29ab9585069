#!/usr/bin/env python3
"""
Five-type Galton-Watson trees.

A tree is stored breadth-first over its variables. Every non-root variable v
hangs below exactly one clause whose other end is parent[v]; that clause
carries the sign pair (sign_parent[v], sign_child[v]). Children of a variable
are contiguous and every parent precedes its children, so a truncation to
fewer generations is a prefix of the arrays. Generation g sits at graph
distance 2g from the root.
"""

import logging
import time
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import InfeasibleBoundary, OutOfRegime, TreeTooLarge
from .formula import Clause, Formula, Literal
from .numerics import sigmoid, softplus
from .rng import parallel_map, stream

logger = logging.getLogger(__name__)

DEFAULT_MAX_NODES = 10_000_000

# (sign of parent, sign of child) for the four clause types
CLAUSE_TYPES = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=np.int8)


@dataclass(frozen=True)
class GWTree:
    depth_limit: int
    parent: np.ndarray
    sign_parent: np.ndarray
    sign_child: np.ndarray
    generation: np.ndarray

    def __post_init__(self):
        if self.parent.size == 0 or self.parent[0] != -1:
            raise ValueError("node 0 must be the root")
        if self.parent.size > 1:
            tail = self.parent[1:]
            if (tail >= np.arange(1, self.parent.size)).any() or (np.diff(tail) < 0).any():
                raise ValueError("nodes must be in breadth-first order")

    @property
    def n(self) -> int:
        return int(self.parent.size)

    @property
    def num_nodes(self) -> int:
        """Variables plus clauses"""
        return 2 * self.n - 1

    @property
    def height(self) -> int:
        return int(self.generation[-1])

    def child_ptr(self) -> np.ndarray:
        counts = np.bincount(self.parent[1:], minlength=self.n)
        return np.concatenate(([1], 1 + np.cumsum(counts)))

    def children(self, u: int) -> np.ndarray:
        ptr = self.child_ptr()
        return np.arange(ptr[u], ptr[u + 1])

    def level(self, g: int) -> np.ndarray:
        return np.nonzero(self.generation == g)[0]

    def boundary(self) -> np.ndarray:
        """Variables at distance exactly 2 * depth_limit"""
        return self.level(self.depth_limit)

    def truncate(self, depth_limit: int) -> "GWTree":
        if depth_limit > self.depth_limit:
            raise ValueError("cannot extend a tree by truncation")
        keep = int(np.searchsorted(self.generation, depth_limit, side='right'))
        return GWTree(depth_limit, self.parent[:keep], self.sign_parent[:keep],
                      self.sign_child[:keep], self.generation[:keep])

    @classmethod
    def build(cls, depth_limit: int, edges: Sequence[Tuple[int, int, int]]) -> "GWTree":
        """From (parent, sign_parent, sign_child) rows for nodes 1..n-1 in BFS order"""
        parent = np.array([-1] + [e[0] for e in edges], dtype=np.int64)
        sign_parent = np.array([0] + [e[1] for e in edges], dtype=np.int8)
        sign_child = np.array([0] + [e[2] for e in edges], dtype=np.int8)
        generation = np.zeros(len(parent), dtype=np.int64)
        for v in range(1, len(parent)):
            generation[v] = generation[parent[v]] + 1
        if generation.max() > depth_limit:
            raise ValueError("edges reach beyond depth_limit")
        return cls(depth_limit, parent, sign_parent, sign_child, generation)


@dataclass(frozen=True)
class BoundaryAssignment:
    """Values imposed on the variables at distance 2 * depth_limit"""
    nodes: np.ndarray
    values: np.ndarray

    def as_dict(self) -> Dict[int, int]:
        return {int(v): int(s) for v, s in zip(self.nodes, self.values)}


@dataclass(frozen=True)
class LLVector:
    """eta per variable; `infinite` marks +inf, `finite` holds the rest"""
    finite: np.ndarray
    infinite: np.ndarray

    def __getitem__(self, x: int) -> float:
        return float('inf') if self.infinite[x] else float(self.finite[x])

    def root_probability(self) -> float:
        """psi(eta_root)"""
        return 1.0 if self.infinite[0] else float(sigmoid(self.finite[0]))


def sample_tree(d: float, depth_limit: int, seed: int, index: int = 0,
                max_nodes: int = DEFAULT_MAX_NODES) -> GWTree:
    """T^(2l): Poisson(d/4) clause children of each of the four types per variable"""
    OutOfRegime.check(d)
    if depth_limit < 0:
        raise ValueError(f"depth must be nonnegative (got {depth_limit})")
    rng = stream(seed, "gw", index)

    parent = [np.array([-1], dtype=np.int64)]
    sign_parent = [np.zeros(1, dtype=np.int8)]
    sign_child = [np.zeros(1, dtype=np.int8)]
    generation = [np.zeros(1, dtype=np.int64)]
    level_start, level_size, total = 0, 1, 1

    for g in range(depth_limit):
        counts = rng.poisson(d / 4.0, size=(level_size, 4))
        born = int(counts.sum())
        if born == 0:
            break
        total += born
        if 2 * total - 1 > max_nodes:
            raise TreeTooLarge(2 * total - 1, max_nodes)
        # children ordered by parent, then by clause type
        parent.append(np.repeat(np.arange(level_start, level_start + level_size), counts.sum(axis=1)))
        types = np.repeat(np.tile(np.arange(4), level_size), counts.reshape(-1))
        sign_parent.append(CLAUSE_TYPES[types, 0])
        sign_child.append(CLAUSE_TYPES[types, 1])
        generation.append(np.full(born, g + 1, dtype=np.int64))
        level_start += level_size
        level_size = born

    return GWTree(depth_limit, np.concatenate(parent), np.concatenate(sign_parent),
                  np.concatenate(sign_child), np.concatenate(generation))


def extremal_boundary(t: GWTree, target: int) -> Tuple[np.ndarray, BoundaryAssignment]:
    """
    sigma^target built top-down: a child satisfies its clause exactly when the
    parent does not.
    """
    if target not in (1, -1):
        raise ValueError("target must be +1 or -1")
    sigma = np.zeros(t.n, dtype=np.int8)
    sigma[0] = target
    for g in range(1, t.height + 1):
        nodes = t.level(g)
        parent_satisfies = t.sign_parent[nodes] == sigma[t.parent[nodes]]
        sigma[nodes] = np.where(parent_satisfies, -t.sign_child[nodes], t.sign_child[nodes])
    bnodes = t.boundary()
    return sigma, BoundaryAssignment(bnodes, sigma[bnodes].copy())


def satisfies_tree(t: GWTree, sigma: np.ndarray) -> bool:
    v = np.arange(1, t.n)
    return bool(((sigma[t.parent[v]] == t.sign_parent[v]) | (sigma[v] == t.sign_child[v])).all())


def subtree_log_counts(t: GWTree, b: Optional[BoundaryAssignment] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    ln Z(T_x, sigma_x = +1) and ln Z(T_x, sigma_x = -1) for every variable,
    counting satisfying extensions that agree with b. -inf is an exact zero.
    """
    log_plus = np.zeros(t.n)
    log_minus = np.zeros(t.n)
    if b is not None and len(b.nodes):
        log_plus[b.nodes] = np.where(b.values > 0, 0.0, -np.inf)
        log_minus[b.nodes] = np.where(b.values < 0, 0.0, -np.inf)

    for g in range(t.height, 0, -1):
        nodes = t.level(g)
        par = t.parent[nodes]
        free = np.logaddexp(log_plus[nodes], log_minus[nodes])
        forced = np.where(t.sign_child[nodes] > 0, log_plus[nodes], log_minus[nodes])
        # parent value t satisfies the clause iff t == sign_parent
        to_plus = np.where(t.sign_parent[nodes] > 0, free, forced)
        to_minus = np.where(t.sign_parent[nodes] < 0, free, forced)
        np.add.at(log_plus, par, to_plus)
        np.add.at(log_minus, par, to_minus)
    return log_plus, log_minus


def _root_probability(log_plus: float, log_minus: float) -> float:
    if np.isneginf(log_plus) and np.isneginf(log_minus):
        raise InfeasibleBoundary("no satisfying assignment agrees with the boundary condition")
    if np.isneginf(log_minus):
        return 1.0
    if np.isneginf(log_plus):
        return 0.0
    return float(sigmoid(log_plus - log_minus))


def conditional_root_marginal(t: GWTree, b: BoundaryAssignment) -> float:
    """mu(sigma_root = +1 | sigma_boundary = b)"""
    lp, lm = subtree_log_counts(t, b)
    return _root_probability(lp[0], lm[0])


def unconditional_root_marginal(t: GWTree) -> float:
    lp, lm = subtree_log_counts(t, None)
    return _root_probability(lp[0], lm[0])


def root_counts_exact(t: GWTree, b: Optional[BoundaryAssignment] = None) -> Tuple[int, int]:
    """(Z(root = +1), Z(root = -1)) as exact integers"""
    plus = [1] * t.n
    minus = [1] * t.n
    if b is not None:
        for v, s in zip(b.nodes.tolist(), b.values.tolist()):
            plus[v] = 1 if s > 0 else 0
            minus[v] = 1 if s < 0 else 0
    parent = t.parent.tolist()
    sp = t.sign_parent.tolist()
    sc = t.sign_child.tolist()
    for v in range(t.n - 1, 0, -1):
        free = plus[v] + minus[v]
        forced = plus[v] if sc[v] > 0 else minus[v]
        u = parent[v]
        plus[u] *= free if sp[v] > 0 else forced
        minus[u] *= free if sp[v] < 0 else forced
    return plus[0], minus[0]


def ll_plus_uppass(t: GWTree, sigma: np.ndarray) -> LLVector:
    """
    eta_x = ln Z(T_x, sigma_x) / Z(T_x, -sigma_x) under the boundary clamp
    sigma restricted to generation depth_limit.
    """
    finite = np.zeros(t.n)
    infinite = np.zeros(t.n, dtype=bool)
    infinite[t.boundary()] = True

    for g in range(min(t.height, t.depth_limit), 0, -1):
        nodes = t.level(g)
        par = t.parent[nodes]
        c = (sigma[par] * t.sign_parent[nodes]).astype(np.float64)
        eta = np.where(infinite[nodes], 0.0, finite[nodes])
        term = c * softplus(c * eta)
        # an infinite child adds +inf when c = +1 and nothing when c = -1
        term = np.where(infinite[nodes], 0.0, term)
        np.add.at(finite, par, term)
        blows_up = infinite[nodes] & (c > 0)
        infinite[par[blows_up]] = True

    assert not np.isneginf(finite).any(), "eta reached -inf"
    finite[infinite] = 0.0
    return LLVector(finite=finite, infinite=infinite)


def implication_subtree(t: GWTree, x: int, s: int) -> Tuple[List[int], int]:
    """Variables forced below x once sigma_x = s is imposed, and their number"""
    if not 0 <= x < t.n:
        raise IndexError(x)
    ptr = t.child_ptr()
    reached = [x]
    stack = [(x, s)]
    while stack:
        u, value = stack.pop()
        for v in range(ptr[u], ptr[u + 1]):
            if t.sign_parent[v] != value:
                reached.append(v)
                stack.append((v, int(t.sign_child[v])))
    return sorted(reached), len(reached)


def tree_to_formula(t: GWTree) -> Tuple[Formula, np.ndarray]:
    """Tree as a Formula; clause v-1 joins parent[v] and v"""
    clauses = tuple(
        Clause(Literal(int(t.parent[v]), int(t.sign_parent[v])), Literal(v, int(t.sign_child[v])))
        for v in range(1, t.n)
    )
    return Formula(t.n, clauses), np.arange(t.n)


def tree_depth(t: GWTree) -> int:
    """Graph distance from the root to the deepest variable"""
    return 2 * t.height


def tree_trial(d: float, depth_limit: int, seed: int, trial: int,
               max_nodes: int = DEFAULT_MAX_NODES) -> List[Dict[str, float]]:
    """Root marginals of one tree for every truncation 1..depth_limit"""
    full = sample_tree(d, depth_limit, seed, index=trial, max_nodes=max_nodes)
    rows = []
    for ell in range(1, depth_limit + 1):
        t = full.truncate(ell)
        sigma_plus, b_plus = extremal_boundary(t, 1)
        _, b_minus = extremal_boundary(t, -1)
        eta = ll_plus_uppass(t, sigma_plus)
        rows.append({
            "trial": trial,
            "ell": ell,
            "marg_unconditional": unconditional_root_marginal(t),
            "marg_sigma_plus": conditional_root_marginal(t, b_plus),
            "marg_sigma_minus": conditional_root_marginal(t, b_minus),
            "eta_root": eta[0],
        })
    return rows


def tree_trials(d: float, depth_limit: int, trials: int, seed: int, threads: int = 1,
                max_nodes: int = DEFAULT_MAX_NODES) -> pd.DataFrame:
    start = time.perf_counter()
    rows = parallel_map(lambda i: tree_trial(d, depth_limit, seed, i, max_nodes), range(trials), threads)
    frame = pd.DataFrame([row for chunk in rows for row in chunk],
                         columns=["trial", "ell", "marg_unconditional", "marg_sigma_plus",
                                  "marg_sigma_minus", "eta_root"])
    logger.info(f"Evaluated {trials} trees (d={d}, depth={depth_limit}) in {time.perf_counter() - start:.2f}s")
    return frame


def boundary_conditions(t: GWTree) -> Iterable[BoundaryAssignment]:
    """Every +-1 vector on the boundary (2^|boundary| of them)"""
    nodes = t.boundary()
    k = len(nodes)
    for code in range(1 << k):
        values = np.array([1 if (code >> i) & 1 else -1 for i in range(k)], dtype=np.int8)
        yield BoundaryAssignment(nodes, values)
