"""Tests for population dynamics and the Wasserstein estimates."""

import math

import numpy as np
import pytest

from cavity2sat.density_evolution import (Operator, Population, PopulationDynamics, Space, cdf_export,
                                          coupled_images, de_init, de_run, de_step, de_step_mu,
                                          de_step_plus, population_summary, wasserstein)
from cavity2sat.errors import OutOfRegime

LN2 = math.log(2)


@pytest.fixture(scope="module")
def settled():
    """LL population at d = 1 after enough generations to sit near the fixed point"""
    return de_run(1.0, 24, 100_000, seed=11).eta


class TestInit:

    def test_delta_zero(self):
        p = de_init(5)
        np.testing.assert_array_equal(p.samples, np.zeros(5))
        assert p.space is Space.ETA
        assert p.generation == 0
        np.testing.assert_array_equal(p.to_mu().samples, np.full(5, 0.5))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            de_init(0)


class TestStep:

    def test_zero_density_is_fixed(self):
        p = de_step(de_init(1000), 0.0, seed=1)
        np.testing.assert_array_equal(p.samples, np.zeros(1000))
        assert p.generation == 1

    @pytest.mark.parametrize("step", [de_step, de_step_plus])
    def test_first_generation_on_ln2_lattice(self, step):
        eta = step(de_init(20_000), 1.3, seed=2).samples
        multiples = eta / LN2
        np.testing.assert_allclose(multiples, np.round(multiples), atol=1e-9)

    def test_first_generation_moments(self):
        d = 1.0
        eta = de_step(de_init(200_000), d, seed=3).samples
        # eta = ln2 * (sum of Po(d) fair signs)
        assert eta.mean() == pytest.approx(0.0, abs=0.02)
        assert np.mean(eta ** 2) / LN2 ** 2 == pytest.approx(d, abs=0.03)
        assert np.mean(eta == 0) >= math.exp(-d) - 0.01

    def test_threads_do_not_change_result(self):
        p = de_init(10_000)
        a = de_step(p, 1.5, seed=4, chunk_size=1000, threads=1)
        b = de_step(p, 1.5, seed=4, chunk_size=1000, threads=4)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_generations_draw_fresh_randomness(self):
        p = de_step(de_init(5000), 1.5, seed=5)
        q = de_step(p, 1.5, seed=5)
        assert not np.array_equal(p.samples, q.samples)

    def test_space_is_checked(self):
        with pytest.raises(ValueError):
            de_step_mu(de_init(10), 1.0, seed=0)
        with pytest.raises(ValueError):
            de_step(de_init(10).to_mu(), 1.0, seed=0)


class TestWasserstein:

    def test_examples(self):
        assert wasserstein(np.array([0.0, 1.0]), np.array([0.0, 3.0]), 1).value == pytest.approx(1.0)
        assert wasserstein(np.array([0.0, 1.0]), np.array([0.0, 3.0]), 2).value == pytest.approx(math.sqrt(2))

    def test_order_does_not_matter(self):
        assert wasserstein(np.array([3.0, 0.0]), np.array([1.0, 0.0]), 1).value == pytest.approx(1.0)

    def test_unequal_sizes(self):
        assert wasserstein(np.array([0.0, 1.0, 2.0, 3.0]), np.array([0.0, 2.0]), 1).value == pytest.approx(1.0)

    def test_identical(self):
        p = de_step(de_init(1000), 1.0, seed=6)
        assert wasserstein(p, p, 2).value == 0.0

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            wasserstein(np.zeros(2), np.zeros(2), 3)
        with pytest.raises(ValueError):
            wasserstein(de_init(3), de_init(3).to_mu())


class TestRun:

    def test_zero_density(self):
        result = de_run(0.0, 5, 1000, seed=0)
        np.testing.assert_array_equal(result.eta.samples, np.zeros(1000))
        np.testing.assert_array_equal(result.mu.samples, np.full(1000, 0.5))

    @pytest.mark.parametrize("d", [2.0, 2.5, -0.1])
    def test_out_of_regime(self, d):
        with pytest.raises(OutOfRegime):
            de_run(d, 3, 100)

    def test_metrics_and_trace(self):
        result = de_run(1.0, 6, 5000, seed=1)
        assert result.metrics["status"] == "completed"
        assert result.metrics["generations"] == 6
        assert result.metrics["duration"] >= 0
        assert len(result.w2_trace) == 6
        assert result.w2_trace[-1] < result.w2_trace[0]

    def test_symmetric_law(self, settled):
        se = settled.samples.std() / math.sqrt(settled.size)
        assert abs(settled.samples.mean()) < 5 * se
        assert settled.to_mu().samples.mean() == pytest.approx(0.5, abs=0.005)

    def test_threads_do_not_change_result(self):
        a = de_run(1.5, 4, 40_000, seed=2, chunk_size=4096, threads=1)
        b = de_run(1.5, 4, 40_000, seed=2, chunk_size=4096, threads=3)
        np.testing.assert_array_equal(a.eta.samples, b.eta.samples)

    def test_bp_mu_dynamics(self):
        result = PopulationDynamics(1.0, 5000, seed=3, operator=Operator.BP_MU).run(4)
        assert result.mu.space is Space.MU
        assert ((result.mu.samples > 0) & (result.mu.samples < 1)).all()
        assert result.eta.generation == 4


class TestContraction:

    @pytest.mark.parametrize("d", [0.5, 1.0, 1.5, 1.9])
    def test_coupled_w2_ratio(self, d):
        a = de_run(d, 6, 100_000, seed=21).eta
        b = Population(0.5 * a.samples + 0.3, Space.ETA, a.generation)
        previous = wasserstein(a, b, 2).value
        for step in range(4):
            a, b = coupled_images(a, b, d, seed=22 + step)
            current = wasserstein(a, b, 2).value
            assert current <= (math.sqrt(d / 2) + 0.05) * previous
            previous = current

    def test_coupled_images_share_randomness(self):
        a = de_run(1.0, 3, 2000, seed=23).eta
        image_a, image_b = coupled_images(a, a, 1.0, seed=24)
        np.testing.assert_array_equal(image_a.samples, image_b.samples)


class TestPopulationStatistics:

    def test_sign_symmetry_every_generation(self):
        p = de_init(50_000)
        for _ in range(10):
            p = de_step(p, 1.5, seed=25)
            bound = 4 * p.samples.std() / math.sqrt(p.size)
            assert wasserstein(p.samples, -p.samples, 1).value <= bound

    def test_second_moment_stable_in_population_size(self):
        small = population_summary(de_run(1.2, 24, 50_000, seed=26).eta)["eta_second_moment"]
        large = population_summary(de_run(1.2, 24, 200_000, seed=27).eta)["eta_second_moment"]
        assert np.isfinite(large)
        assert abs(small - large) < 0.1 * large

    def test_spread_grows_with_density(self):
        low = population_summary(de_run(1.1, 24, 50_000, seed=28).eta)
        high = population_summary(de_run(1.9, 24, 50_000, seed=28).eta)
        assert high["mu_iqr"] > low["mu_iqr"]


class TestFixedPoint:

    def test_bp_mu_matches_ll_image(self, settled):
        via_mu = de_step_mu(settled.to_mu(), 1.0, seed=31)
        via_eta = de_step(settled, 1.0, seed=32).to_mu()
        assert wasserstein(via_mu, via_eta, 1).value <= 0.01

    def test_ll_plus_preserves_ll_fixed_point(self, settled):
        assert wasserstein(settled, de_step_plus(settled, 1.0, seed=33), 1).value <= 0.02

    def test_ll_and_ll_plus_converge_together(self):
        plain = de_run(1.0, 24, 50_000, seed=34).eta
        plus = de_run(1.0, 24, 50_000, seed=35, plus=True).eta
        assert wasserstein(plain, plus, 1).value <= 0.03


class TestExports:

    def test_cdf_of_point_mass(self):
        frame = cdf_export(de_init(10), resolution=4)
        np.testing.assert_allclose(frame["x"], [0, 0.25, 0.5, 0.75, 1.0])
        np.testing.assert_array_equal(frame["cdf"], [0, 0, 1, 1, 1])

    def test_cdf_shape(self, settled):
        frame = cdf_export(settled, resolution=50, label=1.0)
        assert list(frame.columns) == ["d", "x", "cdf"]
        assert (np.diff(frame["cdf"]) >= 0).all()
        assert frame["cdf"].iloc[-1] == 1.0
        # mu = 1/2 carries an atom from the leaves
        assert frame["cdf"].iloc[25] >= 0.5 - 0.01

    def test_cdf_rejects_resolution(self):
        with pytest.raises(ValueError):
            cdf_export(de_init(3), resolution=0)

    def test_summary(self):
        summary = population_summary(de_init(4))
        assert summary["size"] == 4
        assert summary["eta_mean"] == 0.0
        assert summary["mu_median"] == 0.5
        assert summary["mu_iqr"] == 0.0

    def test_summary_of_settled(self, settled):
        summary = population_summary(settled)
        assert summary["mu_q1"] <= summary["mu_median"] <= summary["mu_q3"]
        assert summary["mu_iqr"] == pytest.approx(summary["mu_q3"] - summary["mu_q1"])
        assert summary["eta_second_moment"] >= summary["eta_std"] ** 2 - 1e-9
