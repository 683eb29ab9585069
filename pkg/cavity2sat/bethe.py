#!/usr/bin/env python3
"""
Bethe free entropy estimators.

Monte-Carlo evaluation of the Bethe functional over a population, the soft
functional at inverse temperature beta, the first moment bound, d-grid curves
and the finite-size checks based on exact counting of small formulas. Every
product of marginals is formed as a sum of ln psi(eta).
"""

import logging
import math
import time
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .density_evolution import DEFAULT_CHUNK, Population, Space, de_run
from .errors import ComponentTooLarge, OutOfRegime
from .exact_count import DEFAULT_CAP, count_exact, marginals_exact, soft_partition
from .formula import CoupledTriple, sample_coupled, sample_formula
from .numerics import log1mexp, log_sigmoid, logit, truncated_log_of_log
from .rng import chunk_bounds, parallel_map, random_signs, stream

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
LN3 = math.log(3.0)


@dataclass(frozen=True)
class BetheEstimate:
    value: float
    std_error: float
    samples: int
    d: float
    beta: float = math.inf

    def to_dict(self) -> Dict[str, object]:
        out = asdict(self)
        out["beta"] = "inf" if math.isinf(self.beta) else self.beta
        return out


@dataclass(frozen=True)
class CurvePoint:
    d: float
    bethe: float
    bound: float
    std_error: float


@dataclass(frozen=True)
class AssResult:
    """Empirical increments of E ln(Z v 1) for the n -> n+1 step"""
    delta_extended: float
    delta_extended_error: float
    delta_grown: float
    delta_grown_error: float
    difference: float
    difference_error: float
    predicted_extended: float
    predicted_grown: float
    trials: int
    used: int
    skipped: int

    @property
    def skip_rate(self) -> float:
        return self.skipped / self.trials if self.trials else 0.0

    def to_dict(self) -> Dict[str, object]:
        out = asdict(self)
        out["skip_rate"] = self.skip_rate
        return out


@dataclass(frozen=True)
class FiniteSizeEstimate:
    value: float
    std_error: float
    trials: int
    used: int
    skipped: int

    @property
    def skip_rate(self) -> float:
        return self.skipped / self.trials if self.trials else 0.0


def _mean_and_error(values: np.ndarray) -> Tuple[float, float]:
    if values.size == 0:
        return math.nan, math.nan
    if values.size == 1 or np.ptp(values) == 0:
        return float(values[0]), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def _monte_carlo(sampler: Callable[[np.random.Generator, int], np.ndarray], samples: int,
                 seed: int, key: str, chunk_size: int, threads: int) -> Tuple[float, float]:
    def run_chunk(job):
        j, (lo, hi) = job
        return sampler(stream(seed, key, j), hi - lo)

    parts = parallel_map(run_chunk, list(enumerate(chunk_bounds(samples, chunk_size))), threads)
    return _mean_and_error(np.concatenate(parts))


def _block_sums(values: np.ndarray, counts: np.ndarray) -> np.ndarray:
    return np.bincount(np.repeat(np.arange(counts.size), counts), weights=values, minlength=counts.size)


def _eta_samples(p: Population) -> np.ndarray:
    if p.space is Space.ETA:
        return p.samples
    return logit(p.samples)


def _log_one_minus_product(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """ln(1 - psi(x1) psi(x2)) = ln(psi(-x1) + psi(x1) psi(-x2))"""
    return np.logaddexp(log_sigmoid(-x1), log_sigmoid(x1) + log_sigmoid(-x2))


def bethe_free_entropy(p: Population, d: float, samples: int = 1_000_000, seed: int = 0,
                       lambda_eps: Optional[float] = None, chunk_size: int = DEFAULT_CHUNK,
                       threads: int = 1) -> BetheEstimate:
    """
    E ln(prod_{k-} mu + prod_{k+} mu) - (d/2) E ln(1 - mu1 mu2), k+- ~ Po(d/2).
    With lambda_eps every ln is replaced by ln(max(., eps)).
    """
    if not 0 <= d < 2:
        raise OutOfRegime(d)
    eta = _eta_samples(p)
    log_mu = log_sigmoid(eta)

    def sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        k_minus = rng.poisson(d / 2.0, size=count)
        k_plus = rng.poisson(d / 2.0, size=count)
        a = _block_sums(log_mu[rng.integers(0, log_mu.size, size=int(k_minus.sum()))], k_minus)
        b = _block_sums(log_mu[rng.integers(0, log_mu.size, size=int(k_plus.sum()))], k_plus)
        first = truncated_log_of_log(np.logaddexp(a, b), lambda_eps)
        pair = eta[rng.integers(0, eta.size, size=(count, 2))]
        second = truncated_log_of_log(_log_one_minus_product(pair[:, 0], pair[:, 1]), lambda_eps)
        return first - (d / 2.0) * second

    start = time.perf_counter()
    value, error = _monte_carlo(sampler, samples, seed, "bethe", chunk_size, threads)
    logger.info(f"Bethe d={d}: {value:.6f} +- {error:.6f} ({samples} samples, {time.perf_counter() - start:.2f}s)")
    return BetheEstimate(value, error, samples, d)


def first_moment_bound(d: float) -> float:
    """(1 - d) ln 2 + (d/2) ln 3"""
    if d < 0:
        raise OutOfRegime(d)
    return (1.0 - d) * LN2 + (d / 2.0) * LN3


def soft_bethe(p: Population, d: float, beta: float, samples: int = 1_000_000, seed: int = 0,
               chunk_size: int = DEFAULT_CHUNK, threads: int = 1) -> BetheEstimate:
    """
    Bethe functional of the soft model, c = 1 - e^-beta:
    E ln sum_s prod_{i: s_i != s} (1 - c psi(s'_i eta_i)) - (d/2) E ln(1 - c psi(s_1 eta_1) psi(s_2 eta_2)),
    first expectation over k ~ Po(d). beta = inf gives the hard functional.
    """
    if not beta >= 0:
        raise ValueError(f"beta must be nonnegative (got {beta})")
    if d < 0:
        raise OutOfRegime(d)
    eta = _eta_samples(p)
    hard = math.isinf(beta)

    def log_one_minus_c(log_q: np.ndarray, log_one_minus_q: np.ndarray) -> np.ndarray:
        # ln(1 - c q) = ln((1 - q) + e^-beta q)
        if hard:
            return log_one_minus_q
        return np.logaddexp(log_one_minus_q, -beta + log_q)

    def sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        k = rng.poisson(d, size=count)
        picks = eta[rng.integers(0, eta.size, size=int(k.sum()))]
        s = random_signs(rng, picks.size)
        s_prime = random_signs(rng, picks.size)
        factors = log_one_minus_c(log_sigmoid(s_prime * picks), log_sigmoid(-s_prime * picks))
        # a term enters the s = +1 product when s_i = -1, and vice versa
        plus = _block_sums(np.where(s < 0, factors, 0.0), k)
        minus = _block_sums(np.where(s > 0, factors, 0.0), k)
        first = np.logaddexp(plus, minus)

        pair = eta[rng.integers(0, eta.size, size=(count, 2))]
        pair_signs = random_signs(rng, (count, 2))
        x = pair_signs * pair
        log_q = log_sigmoid(x).sum(axis=1)
        second = log_one_minus_c(log_q, _log_one_minus_product(x[:, 0], x[:, 1]))
        return first - (d / 2.0) * second

    value, error = _monte_carlo(sampler, samples, seed, "soft_bethe", chunk_size, threads)
    logger.info(f"Soft Bethe d={d} beta={beta}: {value:.6f} +- {error:.6f}")
    return BetheEstimate(value, error, samples, d, beta)


def parse_grid(text: str) -> List[float]:
    """'lo:hi:step' -> [lo, lo+step, ..., hi]; a single number is a one-point grid"""
    parts = text.split(':')
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        lo, hi, step = (float(x) for x in parts)
    except ValueError:
        raise ValueError(f"grid must read lo:hi:step (got '{text}')")
    if step <= 0 or hi < lo:
        raise ValueError(f"grid must read lo:hi:step with step > 0 and hi >= lo (got '{text}')")
    count = int(round((hi - lo) / step)) + 1
    return [round(lo + i * step, 10) for i in range(count)]


def curve(d_grid: Sequence[float], iterations: int = 24, pop_size: int = 200_000,
          samples: int = 1_000_000, seed: int = 0, chunk_size: int = DEFAULT_CHUNK,
          threads: int = 1) -> pd.DataFrame:
    """Bethe value against the first moment bound over a d grid"""
    for d in d_grid:
        if not 0 <= d < 2:
            raise OutOfRegime(d)
    points = []
    for d in d_grid:
        result = de_run(d, iterations, pop_size, seed, chunk_size=chunk_size, threads=threads)
        estimate = bethe_free_entropy(result.eta, d, samples, seed, chunk_size=chunk_size, threads=threads)
        points.append(CurvePoint(d, estimate.value, first_moment_bound(d), estimate.std_error))
    return pd.DataFrame([asdict(p) for p in points], columns=["d", "bethe", "bound", "std_error"])


def _minus_probability(p: float, sign: int) -> float:
    """mu(x = -sign) from p = mu(x = +1)"""
    return 1.0 - p if sign > 0 else p


def _predicted_grown(triple: CoupledTriple, marginals) -> float:
    total = 0.0
    for clause in triple.added_to_grown:
        prod = (_minus_probability(marginals[clause.first.var], clause.first.sign)
                * _minus_probability(marginals[clause.second.var], clause.second.sign))
        with np.errstate(divide='ignore'):
            total += float(log1mexp(np.log(prod)))
    return total


def _predicted_extended(triple: CoupledTriple, marginals) -> float:
    new = triple.new_variable
    logs = {1: 0.0, -1: 0.0}
    for clause in triple.added_to_extended:
        own = clause.first if clause.first.var == new else clause.second
        other = clause.other(new)
        q = _minus_probability(marginals[other.var], other.sign)
        for t in (1, -1):
            if t != own.sign:
                logs[t] += math.log1p(-q) if q < 1.0 else -math.inf
    return float(np.logaddexp(logs[1], logs[-1]))


def _ass_trial(n: int, d: float, cap: int, seed: int, index: int) -> Optional[Dict[str, float]]:
    triple = sample_coupled(n, d, seed, index)
    try:
        base = count_exact(triple.base, cap)
        grown = count_exact(triple.grown, cap)
        extended = count_exact(triple.extended, cap)
    except ComponentTooLarge as e:
        logger.debug(f"ASS trial {index} skipped: {e}")
        return None
    row = {
        "extended": extended.log_z - base.log_z,
        "grown": grown.log_z - base.log_z,
        "pred_extended": math.nan,
        "pred_grown": math.nan,
    }
    if base.z > 0:
        marginals = marginals_exact(triple.base, cap)
        row["pred_extended"] = _predicted_extended(triple, marginals)
        row["pred_grown"] = _predicted_grown(triple, marginals)
    return row


def ass_difference(n: int, d: float, trials: int, cap: int = DEFAULT_CAP, seed: int = 0,
                   threads: int = 1) -> AssResult:
    """
    Exact-count estimates of E[ln Z(Phi''') - ln Z(Phi')] and E[ln Z(Phi'') - ln Z(Phi')]
    over coupled triples, with cavity predictions from the exact marginals of Phi'.
    """
    start = time.perf_counter()
    rows = parallel_map(lambda i: _ass_trial(n, d, cap, seed, i), range(trials), threads)
    used = [r for r in rows if r is not None]
    skipped = trials - len(used)
    if skipped:
        logger.warning(f"ASS: skipped {skipped}/{trials} instances with oversized components")

    frame = pd.DataFrame(used, columns=["extended", "grown", "pred_extended", "pred_grown"])
    ext, ext_err = _mean_and_error(frame["extended"].to_numpy())
    grown, grown_err = _mean_and_error(frame["grown"].to_numpy())
    diff, diff_err = _mean_and_error((frame["extended"] - frame["grown"]).to_numpy())
    predictions = frame[["pred_extended", "pred_grown"]].replace([np.inf, -np.inf], np.nan).mean()
    logger.info(f"ASS n={n} d={d}: difference {diff:.4f} +- {diff_err:.4f} in {time.perf_counter() - start:.2f}s")
    return AssResult(
        delta_extended=ext, delta_extended_error=ext_err,
        delta_grown=grown, delta_grown_error=grown_err,
        difference=diff, difference_error=diff_err,
        predicted_extended=float(predictions["pred_extended"]),
        predicted_grown=float(predictions["pred_grown"]),
        trials=trials, used=len(used), skipped=skipped,
    )


def _finite_size(n: int, d: float, trials: int, cap: int, seed: int, threads: int,
                 evaluate: Callable) -> FiniteSizeEstimate:
    def trial(i: int) -> Optional[float]:
        f = sample_formula(n, d, seed, index=i)
        try:
            return evaluate(f) / n
        except ComponentTooLarge:
            return None

    values = [v for v in parallel_map(trial, range(trials), threads) if v is not None]
    mean, error = _mean_and_error(np.array(values, dtype=np.float64))
    return FiniteSizeEstimate(mean, error, trials, len(values), trials - len(values))


def finite_size_free_entropy(n: int, d: float, trials: int, cap: int = DEFAULT_CAP, seed: int = 0,
                             threads: int = 1) -> FiniteSizeEstimate:
    """Mean of n^-1 ln(Z v 1) over random formulas"""
    return _finite_size(n, d, trials, cap, seed, threads, lambda f: count_exact(f, cap).log_z)


def soft_free_entropy(n: int, d: float, beta: float, trials: int, cap: int = DEFAULT_CAP,
                      seed: int = 0, threads: int = 1) -> FiniteSizeEstimate:
    """Mean of n^-1 ln Z_beta over random formulas"""
    return _finite_size(n, d, trials, cap, seed, threads, lambda f: soft_partition(f, beta, cap))
