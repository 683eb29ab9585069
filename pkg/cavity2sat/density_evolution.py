#!/usr/bin/env python3
"""
Population dynamics for the density-evolution operators.

Populations live in eta-space (log-likelihood ratios) unless tagged MU. Each
generation is produced chunk by chunk; chunk j of generation g of operator op
draws from stream(seed, "de", op, g, j), so the result does not depend on the
number of threads.
"""

import logging
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .errors import OutOfRegime
from .numerics import LOG_FLOOR, log_sigmoid, logit, sigmoid, softplus
from .rng import chunk_bounds, parallel_map, random_signs, stream

logger = logging.getLogger(__name__)

DEFAULT_CHUNK = 16_384
MU_LOW = float(np.exp(LOG_FLOOR))
MU_HIGH = float(np.nextafter(1.0, 0.0))


class Space(Enum):
    ETA = "eta"
    MU = "mu"


class Operator(Enum):
    LL = "ll"
    LL_PLUS = "ll_plus"
    BP_MU = "bp_mu"


@dataclass(frozen=True)
class Population:
    samples: np.ndarray
    space: Space = Space.ETA
    generation: int = 0

    def __post_init__(self):
        if self.samples.size == 0:
            raise ValueError("population must be nonempty")

    @property
    def size(self) -> int:
        return int(self.samples.size)

    def to_mu(self) -> "Population":
        """psi image, clamped away from {0, 1}"""
        if self.space is Space.MU:
            return self
        mu = np.clip(sigmoid(self.samples), MU_LOW, MU_HIGH)
        return Population(mu, Space.MU, self.generation)

    def log_mu(self) -> np.ndarray:
        """ln mu per sample, exact for eta-space populations"""
        if self.space is Space.ETA:
            return log_sigmoid(self.samples)
        return np.log(self.samples)


@dataclass(frozen=True)
class WassersteinEstimate:
    q: int
    value: float

    def __float__(self) -> float:
        return self.value


@dataclass
class DensityEvolutionResult:
    eta: Population
    mu: Population
    w2_trace: List[float] = field(default_factory=list)
    metrics: Dict[str, Any] = field(default_factory=dict)


def de_init(size: int) -> Population:
    """delta_0 in eta-space (delta_{1/2} in mu-space)"""
    if size < 1:
        raise ValueError(f"population size must be positive (got {size})")
    return Population(np.zeros(size), Space.ETA, 0)


def _ll_chunk(eta: np.ndarray, d: float, rng: np.random.Generator, count: int) -> np.ndarray:
    k = rng.poisson(d, size=count)
    picks = eta[rng.integers(0, eta.size, size=int(k.sum()))]
    s = random_signs(rng, picks.size)
    s_prime = random_signs(rng, picks.size)
    # s * ln((1 + s' tanh(eta / 2)) / 2)
    terms = -s * softplus(-s_prime * picks)
    return np.bincount(np.repeat(np.arange(count), k), weights=terms, minlength=count)


def _ll_plus_chunk(eta: np.ndarray, d: float, rng: np.random.Generator, count: int) -> np.ndarray:
    k = rng.poisson(d, size=count)
    picks = eta[rng.integers(0, eta.size, size=int(k.sum()))]
    s = random_signs(rng, picks.size)
    terms = s * softplus(s * picks)
    return np.bincount(np.repeat(np.arange(count), k), weights=terms, minlength=count)


def _bp_mu_chunk(log_mu: np.ndarray, d: float, rng: np.random.Generator, count: int) -> np.ndarray:
    k_minus = rng.poisson(d / 2.0, size=count)
    k_plus = rng.poisson(d / 2.0, size=count)
    picks_minus = log_mu[rng.integers(0, log_mu.size, size=int(k_minus.sum()))]
    picks_plus = log_mu[rng.integers(0, log_mu.size, size=int(k_plus.sum()))]
    owners = np.arange(count)
    log_minus = np.bincount(np.repeat(owners, k_minus), weights=picks_minus, minlength=count)
    log_plus = np.bincount(np.repeat(owners, k_plus), weights=picks_plus, minlength=count)
    out = np.exp(log_minus - np.logaddexp(log_minus, log_plus))
    return np.clip(out, MU_LOW, MU_HIGH)


_KERNELS: Dict[Operator, Callable] = {
    Operator.LL: _ll_chunk,
    Operator.LL_PLUS: _ll_plus_chunk,
    Operator.BP_MU: _bp_mu_chunk,
}


def _apply(op: Operator, p: Population, d: float, seed: int,
           chunk_size: int = DEFAULT_CHUNK, threads: int = 1) -> Population:
    expected = Space.MU if op is Operator.BP_MU else Space.ETA
    if p.space is not expected:
        raise ValueError(f"{op.value} expects a {expected.value}-space population")
    source = p.log_mu() if op is Operator.BP_MU else p.samples
    kernel = _KERNELS[op]

    def run_chunk(job):
        j, (lo, hi) = job
        rng = stream(seed, "de", op.value, p.generation, j)
        return kernel(source, d, rng, hi - lo)

    parts = parallel_map(run_chunk, list(enumerate(chunk_bounds(p.size, chunk_size))), threads)
    return Population(np.concatenate(parts), p.space, p.generation + 1)


def de_step(p: Population, d: float, seed: int, chunk_size: int = DEFAULT_CHUNK,
            threads: int = 1) -> Population:
    """One LL_d step: eta' = sum_{i<=k} s_i ln((1 + s'_i tanh(eta_i / 2)) / 2), k ~ Po(d)"""
    return _apply(Operator.LL, p, d, seed, chunk_size, threads)


def de_step_plus(p: Population, d: float, seed: int, chunk_size: int = DEFAULT_CHUNK,
                 threads: int = 1) -> Population:
    """One LL+_d step: eta' = sum_{i<=k} s_i softplus(s_i eta_i), one sign per term"""
    return _apply(Operator.LL_PLUS, p, d, seed, chunk_size, threads)


def de_step_mu(p: Population, d: float, seed: int, chunk_size: int = DEFAULT_CHUNK,
               threads: int = 1) -> Population:
    """One BP_d step on (0, 1) with two independent Po(d/2) blocks"""
    return _apply(Operator.BP_MU, p, d, seed, chunk_size, threads)


def _thin(sorted_values: np.ndarray, size: int) -> np.ndarray:
    """Order statistics at evenly spaced ranks"""
    ranks = ((np.arange(size) + 0.5) * sorted_values.size / size).astype(np.int64)
    return sorted_values[ranks]


def wasserstein(a: Union[Population, np.ndarray], b: Union[Population, np.ndarray],
                q: int = 1) -> WassersteinEstimate:
    """W_q of two empirical measures via the sorted coupling"""
    if q not in (1, 2):
        raise ValueError(f"q must be 1 or 2 (got {q})")
    if isinstance(a, Population) and isinstance(b, Population) and a.space is not b.space:
        raise ValueError("populations live in different spaces")
    xa = np.sort(a.samples if isinstance(a, Population) else np.asarray(a, dtype=np.float64))
    xb = np.sort(b.samples if isinstance(b, Population) else np.asarray(b, dtype=np.float64))
    if xa.size > xb.size:
        xa = _thin(xa, xb.size)
    elif xb.size > xa.size:
        xb = _thin(xb, xa.size)
    gaps = np.abs(xa - xb)
    value = float(gaps.mean()) if q == 1 else float(np.sqrt(np.mean(gaps ** 2)))
    return WassersteinEstimate(q, value)


class PopulationDynamics:
    """Iterates one density-evolution operator from delta_0 and records metrics"""

    def __init__(self, d: float, pop_size: int, seed: int, operator: Operator = Operator.LL,
                 chunk_size: int = DEFAULT_CHUNK, threads: int = 1):
        OutOfRegime.check(d)
        self.d = d
        self.pop_size = pop_size
        self.seed = seed
        self.operator = operator
        self.chunk_size = chunk_size
        self.threads = threads
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")
        self.metrics = {
            'start_time': None,
            'end_time': None,
            'duration': None,
            'status': 'pending',
            'generations': 0,
        }

    def start_execution(self):
        self.metrics['start_time'] = datetime.now()
        self.metrics['status'] = 'running'
        self.logger.info(f"Starting {self.operator.value} dynamics d={self.d} N={self.pop_size}")

    def end_execution(self, status: str = 'completed'):
        self.metrics['end_time'] = datetime.now()
        self.metrics['duration'] = (self.metrics['end_time'] - self.metrics['start_time']).total_seconds()
        self.metrics['status'] = status
        self.logger.info(f"Completed {self.metrics['generations']} generations in {self.metrics['duration']:.2f}s")

    def initial(self) -> Population:
        p = de_init(self.pop_size)
        return p.to_mu() if self.operator is Operator.BP_MU else p

    def run(self, iterations: int, start: Optional[Population] = None) -> DensityEvolutionResult:
        self.start_execution()
        current = start if start is not None else self.initial()
        trace = []
        try:
            for _ in range(iterations):
                nxt = _apply(self.operator, current, self.d, self.seed, self.chunk_size, self.threads)
                trace.append(wasserstein(current, nxt, 2).value)
                self.logger.debug(f"generation {nxt.generation}: W2 step {trace[-1]:.3e}")
                current = nxt
                self.metrics['generations'] += 1
        except Exception:
            self.end_execution('failed')
            raise
        self.end_execution()

        if current.space is Space.MU:
            eta = Population(logit(current.samples), Space.ETA, current.generation)
            mu = current
        else:
            eta, mu = current, current.to_mu()
        return DensityEvolutionResult(eta=eta, mu=mu, w2_trace=trace,
                                      metrics={k: v for k, v in self.metrics.items()
                                               if k in ('duration', 'status', 'generations')})


def de_run(d: float, iterations: int = 24, size: int = 200_000, seed: int = 0,
           plus: bool = False, chunk_size: int = DEFAULT_CHUNK, threads: int = 1) -> DensityEvolutionResult:
    """Iterate LL_d (or LL+_d) from delta_0; returns eta population, mu image and W2 trace"""
    operator = Operator.LL_PLUS if plus else Operator.LL
    return PopulationDynamics(d, size, seed, operator, chunk_size, threads).run(iterations)


def cdf_export(p: Population, resolution: int = 200, label: Optional[float] = None) -> pd.DataFrame:
    """Empirical CDF of the mu image on a uniform grid over [0, 1]"""
    if resolution < 1:
        raise ValueError("resolution must be positive")
    mu = np.sort(p.to_mu().samples)
    grid = np.linspace(0.0, 1.0, resolution + 1)
    frame = pd.DataFrame({"x": grid, "cdf": np.searchsorted(mu, grid, side='right') / mu.size})
    if label is not None:
        frame.insert(0, "d", label)
    return frame


def population_summary(p: Population) -> Dict[str, float]:
    eta = p.samples if p.space is Space.ETA else logit(p.samples)
    mu = p.to_mu().samples
    q1, median, q3 = np.quantile(mu, [0.25, 0.5, 0.75])
    return {
        "size": p.size,
        "generation": p.generation,
        "eta_mean": float(eta.mean()),
        "eta_std": float(eta.std()),
        "eta_second_moment": float(np.mean(eta ** 2)),
        "mu_mean": float(mu.mean()),
        "mu_std": float(mu.std()),
        "mu_q1": float(q1),
        "mu_median": float(median),
        "mu_q3": float(q3),
        "mu_iqr": float(q3 - q1),
    }


def coupled_images(a: Population, b: Population, d: float, seed: int,
                   chunk_size: int = DEFAULT_CHUNK) -> Tuple[Population, Population]:
    """Apply LL_d to two sorted populations with shared randomness"""
    sa = replace(a, samples=np.sort(a.samples), generation=0)
    sb = replace(b, samples=np.sort(b.samples), generation=0)
    return de_step(sa, d, seed, chunk_size), de_step(sb, d, seed, chunk_size)
