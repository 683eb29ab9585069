#!/usr/bin/env python3
"""
Acceptance run - desk-scale reproduction of the headline numbers

Runs each check in turn, prints a PASS/FAIL table and exits nonzero when any
check fails. --quick shrinks populations and trial counts for a smoke run;
the tolerances are only meaningful at full size.
"""

import argparse
import logging
import math
import sys
import time
from datetime import datetime
from pathlib import Path

import numpy as np

sys.path.append(str(Path(__file__).resolve().parent.parent))

from cavity2sat.bethe import (bethe_free_entropy, first_moment_bound, soft_bethe,  # noqa: E402
                              soft_free_entropy)
from cavity2sat.density_evolution import Population, Space, coupled_images, de_run, wasserstein  # noqa: E402
from cavity2sat.exact_count import count_exact, count_single_block  # noqa: E402
from cavity2sat.formula import sample_formula  # noqa: E402
from cavity2sat.gw_tree import tree_trials  # noqa: E402
from cavity2sat.log import setup_logging  # noqa: E402
from cavity2sat.rng import stream  # noqa: E402
from cavity2sat.ucp import check_fact_uc  # noqa: E402

logger = logging.getLogger(__name__)


class AcceptanceRunner:
    def __init__(self, quick: bool = False, threads: int = 1, seed: int = 0):
        self.scale = 0.1 if quick else 1.0
        self.threads = threads
        self.seed = seed
        self.test_results = []

    def size(self, full: int) -> int:
        return max(int(full * self.scale), 100)

    def record(self, name: str, passed: bool, details: str, started: float):
        self.test_results.append({
            "test": name,
            "status": "✅ PASS" if passed else "❌ FAIL",
            "details": f"{details} ({time.perf_counter() - started:.1f}s)",
        })
        return passed

    def population(self, d: float):
        return de_run(d, 24, self.size(200_000), self.seed, threads=self.threads)

    def test_reference_value(self):
        """Bethe value at d = 1.2 against 0.515"""
        started = time.perf_counter()
        estimate = bethe_free_entropy(self.population(1.2).eta, 1.2, self.size(1_000_000), self.seed,
                                      threads=self.threads)
        passed = abs(estimate.value - 0.515) <= 0.005 and estimate.value < first_moment_bound(1.2)
        return self.record("Bethe value at d=1.2", passed,
                           f"{estimate.value:.5f} +- {estimate.std_error:.5f}", started)

    def test_first_moment_gap(self):
        started = time.perf_counter()
        worst = math.inf
        passed = True
        for d in np.round(np.arange(0.2, 1.81, 0.2), 10):
            estimate = bethe_free_entropy(self.population(d).eta, d, self.size(1_000_000), self.seed,
                                          threads=self.threads)
            gap = first_moment_bound(d) - estimate.value
            worst = min(worst, gap / max(estimate.std_error, 1e-12))
            passed &= gap > 3 * estimate.std_error
        return self.record("First moment bound is not tight", passed, f"smallest gap {worst:.1f} se", started)

    def test_oracle_equivalence(self):
        started = time.perf_counter()
        mismatches = 0
        for index in range(100):
            d = (0.5, 1.0, 1.9)[index % 3]
            f = sample_formula(4 + index % 9, d, self.seed, index=index)
            mismatches += count_exact(f).z != count_single_block(f).z
        return self.record("Component count equals full enumeration", mismatches == 0,
                           f"{mismatches} mismatches", started)

    def test_gibbs_decay(self):
        started = time.perf_counter()
        frame = tree_trials(1.5, 6, self.size(2000), self.seed, self.threads)
        gap = (frame["marg_sigma_plus"] - frame["marg_unconditional"]).abs().groupby(frame["ell"])
        means, errors = gap.mean(), gap.std() / np.sqrt(gap.count())
        monotone = all(means[ell + 1] <= means[ell] + 2 * errors[ell + 1] for ell in range(1, 6))
        passed = monotone and means[6] < 0.5 * means[1]
        return self.record("Boundary influence decays on trees", passed,
                           f"ell=1: {means[1]:.4f}, ell=6: {means[6]:.4f}", started)

    def test_contraction(self):
        """Coupled images of two distinct populations after five burn-in generations"""
        started = time.perf_counter()
        failures = []
        worst = 0.0
        for d in (0.5, 1.0, 1.5, 1.9):
            a = de_run(d, 5, self.size(200_000), self.seed, threads=self.threads).eta
            b = Population(0.5 * a.samples + 0.3, Space.ETA, a.generation)
            previous = wasserstein(a, b, 2).value
            for step in range(4):
                a, b = coupled_images(a, b, d, self.seed + step)
                current = wasserstein(a, b, 2).value
                ratio = current / previous
                worst = max(worst, ratio - math.sqrt(d / 2))
                if ratio > math.sqrt(d / 2) + 0.05:
                    failures.append(f"d={d} step {step}: {ratio:.3f}")
                previous = current
        return self.record("W2 contraction", not failures,
                           ", ".join(failures) or f"largest excess over sqrt(d/2): {worst:+.3f}", started)

    def test_symmetry(self):
        started = time.perf_counter()
        mu = np.sort(self.population(1.5).mu.samples)
        n = mu.size
        tolerance = 4 / math.sqrt(n)
        mean_ok = abs(mu.mean() - 0.5) <= 4 * mu.std() / math.sqrt(n)
        deciles = np.arange(1, 5) / 10
        lower = np.searchsorted(mu, deciles, side='right') / n
        upper = np.searchsorted(mu, 1 - deciles, side='right') / n
        cdf_ok = bool((np.abs(lower + upper - 1) <= tolerance).all())
        return self.record("Symmetric marginal law", bool(mean_ok and cdf_ok), f"mean {mu.mean():.5f}", started)

    def test_counting_inequality(self):
        started = time.perf_counter()
        rng = stream(self.seed, "acceptance", "fact")
        violations = 0
        for index in range(200):
            f = sample_formula(14, float(rng.uniform(0.2, 1.9)), self.seed, index=index)
            variables = rng.choice(f.n, size=int(rng.integers(1, 4)), replace=False)
            chi = {int(v): int(rng.choice([-1, 1])) for v in variables}
            violations += not check_fact_uc(f, chi).holds
        return self.record("Counting inequality under unit propagation", violations == 0,
                           f"{violations} violations", started)

    def test_soft_ordering(self):
        started = time.perf_counter()
        eta = self.population(1.0).eta
        samples = self.size(1_000_000)
        soft = {beta: soft_bethe(eta, 1.0, beta, samples, self.seed, threads=self.threads)
                for beta in (1, 2, 4, 8, 16)}
        hard = bethe_free_entropy(eta, 1.0, samples, self.seed, threads=self.threads)
        exact = soft_free_entropy(60, 1.0, 4.0, max(int(200 * self.scale), 20), seed=self.seed,
                                  threads=self.threads)
        bound_ok = exact.value <= soft[4].value + 3 * math.hypot(exact.std_error, soft[4].std_error)
        betas = sorted(soft)
        decreasing = all(soft[b].value <= soft[a].value + 3 * math.hypot(soft[a].std_error, soft[b].std_error)
                         for a, b in zip(betas, betas[1:]))
        close = abs(soft[16].value - hard.value) <= 0.01
        return self.record("Soft model ordering", bound_ok and decreasing and close,
                           f"exact {exact.value:.4f} vs Bethe {soft[4].value:.4f} at beta=4", started)

    def run_all_tests(self):
        print("🧪 Running acceptance checks")
        print("=" * 50)
        checks = [self.test_oracle_equivalence, self.test_counting_inequality, self.test_reference_value,
                  self.test_symmetry, self.test_contraction, self.test_gibbs_decay, self.test_soft_ordering,
                  self.test_first_moment_gap]
        for check in checks:
            try:
                check()
            except Exception as e:
                logger.exception(f"{check.__name__} raised")
                self.test_results.append({"test": check.__name__, "status": "❌ FAIL", "details": str(e)})

        print("\n" + "=" * 50)
        print("📋 Results Summary")
        print("=" * 50)
        passed = sum(1 for r in self.test_results if "PASS" in r["status"])
        for result in self.test_results:
            print(f"{result['status']:<12} {result['test']}")
            print(f"              └─ {result['details']}")
        print("\n" + "=" * 50)
        print(f"📊 Overall: {passed}/{len(self.test_results)} checks passed")
        return passed == len(self.test_results)


def main():
    parser = argparse.ArgumentParser(description="Desk-scale acceptance checks")
    parser.add_argument("--quick", action="store_true", help="one tenth of the full sizes")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    setup_logging("WARNING")
    print(f"🚀 cavity2sat acceptance - {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    success = AcceptanceRunner(args.quick, args.threads, args.seed).run_all_tests()
    sys.exit(0 if success else 1)


if __name__ == "__main__":
    main()
