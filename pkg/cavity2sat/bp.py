#!/usr/bin/env python3
"""
Synchronous Belief Propagation on the factor graph of a 2-SAT formula.

Only nu(+1) is stored per directed edge; nu(-1) = 1 - nu(+1). Within round l
the clause->variable messages are computed from the round l-1
variable->clause messages, and the round l variable->clause messages from the
fresh clause->variable ones. Products are accumulated as sums of logs with an
exact-zero count kept beside them, so the 1/2 convention for a vanishing
normaliser fires only on exact zeros.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import pandas as pd

from .formula import FactorGraph, Formula
from .numerics import LOG_FLOOR, sigmoid

logger = logging.getLogger(__name__)


@dataclass
class MessageState:
    """nu(+1) per edge in both directions after `round` synchronous rounds"""
    clause_to_var: np.ndarray
    var_to_clause: np.ndarray
    round: int = 0

    def check(self) -> None:
        for name in ("clause_to_var", "var_to_clause"):
            values = getattr(self, name)
            if values.size and not ((values >= 0.0) & (values <= 1.0)).all():
                raise AssertionError(f"{name} left [0, 1] in round {self.round}")


@dataclass
class MarginalEstimate:
    values: np.ndarray
    round: int

    def __getitem__(self, x: int) -> float:
        return float(self.values[x])


def default_rounds(n: int) -> int:
    """2 * ceil(log2 n) + 10"""
    return 2 * math.ceil(math.log2(max(n, 1))) + 10


def init_messages(g: FactorGraph) -> MessageState:
    return MessageState(
        clause_to_var=np.full(g.num_edges, 0.5),
        var_to_clause=np.full(g.num_edges, 0.5),
        round=0,
    )


def _log_or_zero(values: np.ndarray) -> np.ndarray:
    """ln v with -inf for exact zeros, nonzero values floored at e^LOG_FLOOR"""
    with np.errstate(divide='ignore'):
        logs = np.log(values)
    return np.where(values > 0.0, np.maximum(logs, LOG_FLOOR), -np.inf)


def _accumulate(g: FactorGraph, log_values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-variable (sum of finite logs, number of exact zeros)"""
    zero = np.isneginf(log_values)
    finite = np.where(zero, 0.0, log_values)
    sums = np.bincount(g.edge_var, weights=finite, minlength=g.n)
    zeros = np.bincount(g.edge_var, weights=zero.astype(np.float64), minlength=g.n)
    return sums, zeros


def _normalise(log_plus, zeros_plus, log_minus, zeros_minus) -> np.ndarray:
    """P(+) / (P(+) + P(-)) with 1/2 when both products vanish"""
    ratio = sigmoid(log_plus - log_minus)
    plus_zero = zeros_plus > 0
    minus_zero = zeros_minus > 0
    out = np.where(plus_zero, 0.0, np.where(minus_zero, 1.0, ratio))
    return np.where(plus_zero & minus_zero, 0.5, out)


def _clause_to_var(g: FactorGraph, var_to_clause: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(nu_{a->x}(+1), nu_{a->x}(-1)) from the partner's var->clause message"""
    partner = g.edge_partner
    # w = nu_{y->a}(sign(y, a))
    w = np.where(g.edge_sign[partner] > 0, var_to_clause[partner], 1.0 - var_to_clause[partner])
    positive = g.edge_sign > 0
    plus = np.where(positive, 1.0, w) / (1.0 + w)
    minus = np.where(positive, w, 1.0) / (1.0 + w)
    return plus, minus


def bp_step(g: FactorGraph, s: MessageState) -> MessageState:
    """One synchronous round l-1 -> l"""
    c2v_plus, c2v_minus = _clause_to_var(g, s.var_to_clause)

    log_plus = _log_or_zero(c2v_plus)
    log_minus = _log_or_zero(c2v_minus)
    sum_plus, zero_plus = _accumulate(g, log_plus)
    sum_minus, zero_minus = _accumulate(g, log_minus)

    # products over partial-x minus a: remove the edge's own factor
    own_zero_plus = np.isneginf(log_plus)
    own_zero_minus = np.isneginf(log_minus)
    excl_plus = sum_plus[g.edge_var] - np.where(own_zero_plus, 0.0, log_plus)
    excl_minus = sum_minus[g.edge_var] - np.where(own_zero_minus, 0.0, log_minus)
    v2c = _normalise(excl_plus, zero_plus[g.edge_var] - own_zero_plus,
                     excl_minus, zero_minus[g.edge_var] - own_zero_minus)

    return MessageState(clause_to_var=c2v_plus, var_to_clause=v2c, round=s.round + 1)


def read_marginals(g: FactorGraph, s: MessageState) -> MarginalEstimate:
    """nu_x(+1) = prod_a nu_{a->x}(+1) / (prod nu(+1) + prod nu(-1))"""
    sum_plus, zero_plus = _accumulate(g, _log_or_zero(s.clause_to_var))
    sum_minus, zero_minus = _accumulate(g, _log_or_zero(1.0 - s.clause_to_var))
    return MarginalEstimate(_normalise(sum_plus, zero_plus, sum_minus, zero_minus), s.round)


def bp_run(f: Formula, rounds: int) -> Tuple[MessageState, MarginalEstimate]:
    if rounds < 0:
        raise ValueError(f"rounds must be nonnegative (got {rounds})")
    start = time.perf_counter()
    g = FactorGraph(f)
    state = init_messages(g)
    for _ in range(rounds):
        state = bp_step(g, state)
    marginals = read_marginals(g, state)
    logger.info(f"BP: {rounds} rounds on n={f.n} m={f.m} in {time.perf_counter() - start:.2f}s")
    return state, marginals


def empirical_marginal_distribution(f: Formula, rounds: int) -> np.ndarray:
    """Multiset of BP marginals, returned sorted"""
    _, marginals = bp_run(f, rounds)
    return np.sort(marginals.values)


def messages_frame(g: FactorGraph, s: MessageState) -> pd.DataFrame:
    """Message dump: one row per (edge, direction)"""
    edges = np.arange(g.num_edges)
    common = {"edge": edges, "clause": edges // 2, "var": g.edge_var}
    c2v = pd.DataFrame({**common, "direction": "clause_to_var", "value": s.clause_to_var})
    v2c = pd.DataFrame({**common, "direction": "var_to_clause", "value": s.var_to_clause})
    return pd.concat([c2v, v2c], ignore_index=True)
