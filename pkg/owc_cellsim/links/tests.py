import math

import numpy as np
from django.test import SimpleTestCase

from links.coexistence import (
    DB_FLOOR,
    CellSystem,
    CoexistenceScenario,
    _pick_serving,
    summarize,
    to_db,
)
from links.receiver import (
    ELECTRON_CHARGE,
    AngleDiversityReceiver,
    NoiseParams,
    OokSignal,
    ReceiverBranch,
    ber_from_sinr,
    branch_link_arrays,
    branch_sinr,
    combine_mrc,
    combine_sc,
    evaluate_adr,
    inverse_q,
    max_rate_at_ber,
    noise_sigma,
    q_function,
    sinr_threshold_for_ber,
)
from optics.emitters import DOWN, LambertianSource, lambertian_order
from optics.geometry import DiscretizationPolicy, Room, ScalarGrid, Vec3, cf_grid
from optics.propagation import ChannelModel
from scenarios.loader import load_scenario
from scenarios.runner import SimulationRun

NOISE = NoiseParams(bandwidth=1e9, preamp_noise_density=4.47e-12)


def _series_q(x: float) -> float:
    """Q(x) from the all-positive Taylor series of erf, summed with fsum."""
    z = x / math.sqrt(2.0)
    term = z
    terms = [term]
    n = 0
    while term > 1e-300 and n < 2000:
        term *= 2.0 * z * z / (2 * n + 3)
        terms.append(term)
        n += 1
    erf = 2.0 / math.sqrt(math.pi) * math.exp(-z * z) * math.fsum(terms)
    return (1.0 - erf) / 2.0


class BitErrorTests(SimpleTestCase):
    def test_q_function_reference_values(self) -> None:
        self.assertEqual(float(q_function(0.0)), 0.5)
        self.assertAlmostEqual(float(q_function(6.0)) / 9.8659e-10, 1.0, places=4)

    def test_q_function_matches_series(self) -> None:
        for i in range(1000):
            x = 8.0 * i / 999
            self.assertLess(abs(float(q_function(x)) - _series_q(x)), 1e-12)

    def test_q_function_is_vectorized(self) -> None:
        values = q_function(np.array([0.0, 1.0, 2.0]))
        self.assertEqual(values.shape, (3,))
        self.assertTrue(np.all(np.diff(values) < 0))

    def test_inverse_q_round_trip(self) -> None:
        for p in (0.4, 1e-3, 1e-9, 1e-12):
            self.assertAlmostEqual(float(q_function(inverse_q(p))) / p, 1.0, places=6)
        with self.assertRaises(ValueError):
            inverse_q(0.0)

    def test_ber_from_sinr(self) -> None:
        self.assertEqual(ber_from_sinr(0.0), 0.5)
        self.assertAlmostEqual(ber_from_sinr(36.0), float(q_function(6.0)))
        self.assertGreater(ber_from_sinr(10.0), ber_from_sinr(20.0))
        with self.assertRaises(ValueError):
            ber_from_sinr(-1.0)

    def test_threshold_for_target_ber(self) -> None:
        threshold = sinr_threshold_for_ber(1e-9)
        self.assertAlmostEqual(10 * math.log10(threshold), 15.56, places=2)
        self.assertLessEqual(ber_from_sinr(threshold), 1e-9 * (1 + 1e-9))

    def test_max_rate_at_ber(self) -> None:
        self.assertEqual(max_rate_at_ber(36.0, 1e9, 1e-9), 1e9)
        self.assertEqual(max_rate_at_ber(0.0, 1e9, 1e-9), 0.0)
        self.assertEqual(max_rate_at_ber(30.0, 1e9, 1e-9), 0.0)
        self.assertAlmostEqual(max_rate_at_ber(36.0, 30e6, 1e-9, efficiency=42.8 / 30), 42.8e6, delta=1e-3)


class NoiseAndCombiningTests(SimpleTestCase):
    def test_dark_receiver_has_preamp_noise_only(self) -> None:
        sigma = noise_sigma(0.0, NOISE, 0.4)
        self.assertAlmostEqual(sigma, math.sqrt(4.47e-12 ** 2 * 1e9), places=20)
        wide = NoiseParams(bandwidth=2e9, preamp_noise_density=4.47e-12)
        self.assertAlmostEqual(noise_sigma(0.0, wide, 0.4) / sigma, math.sqrt(2.0))

    def test_noise_terms_add_in_quadrature(self) -> None:
        params = NoiseParams(bandwidth=1e8, preamp_noise_density=1e-12, background_current=5e-6)
        expected = math.sqrt(
            1e-24 * 1e8
            + 2 * ELECTRON_CHARGE * (5e-6 + 0.4 * 1e-5) * 1e8
            + 2 * ELECTRON_CHARGE * 0.4 * 2e-5 * 1e8
        )
        self.assertAlmostEqual(noise_sigma(2e-5, params, 0.4, background_power=1e-5) / expected, 1.0, places=12)

    def test_branch_sinr_reference(self) -> None:
        signal = OokSignal(p1=1e-6)
        self.assertAlmostEqual(branch_sinr(signal, [], 1e-7, 0.4), 16.0)
        self.assertLess(branch_sinr(signal, [OokSignal(p1=5e-7)], 1e-7, 0.4), 16.0)
        self.assertAlmostEqual(branch_sinr(signal, [OokSignal(p1=1e-6)], 1e-15, 0.4), 1.0, places=6)
        with self.assertRaises(ValueError):
            branch_sinr(signal, [], 0.0, 0.4)

    def test_ook_levels(self) -> None:
        self.assertEqual(OokSignal.from_average(1e-6), OokSignal(p1=2e-6, p0=0.0))
        with self.assertRaises(ValueError):
            OokSignal(p1=1.0, p0=2.0)

    def test_combining(self) -> None:
        self.assertEqual(combine_sc([4.0, 9.0, 1.0]), 9.0)
        self.assertEqual(combine_mrc([4.0, 9.0, 1.0]), 14.0)
        self.assertAlmostEqual(combine_mrc([3.0] * 7) / combine_sc([3.0] * 7), 7.0)
        with self.assertRaises(ValueError):
            combine_sc([])
        with self.assertRaises(ValueError):
            combine_mrc([])


class ReceiverTests(SimpleTestCase):
    def setUp(self) -> None:
        self.receiver = AngleDiversityReceiver.build(Vec3(1.0, 1.0, 0.5))
        self.room = Room(2.0, 2.0, 2.0, 0.8, 0.8, 0.3, 0.5)
        self.model = ChannelModel(self.room, DiscretizationPolicy(0.25, 0.5), max_order=0)

    def test_default_receiver_branches(self) -> None:
        self.assertEqual(len(self.receiver.branches), 7)
        top = self.receiver.branches[-1]
        self.assertEqual((top.elevation, top.fov), (90.0, 30.0))
        self.assertEqual(top.direction, Vec3(0.0, 0.0, 1.0))
        self.assertEqual([b.azimuth for b in self.receiver.branches[:6]], [0.0, 60.0, 120.0, 180.0, 240.0, 300.0])
        with self.assertRaises(ValueError):
            AngleDiversityReceiver(position=Vec3(0, 0, 0), branches=self.receiver.branches[:6])

    def test_evaluation_without_interference(self) -> None:
        overhead = LambertianSource(Vec3(1.0, 1.0, 2.0), DOWN, lambertian_order(40), 4.0)
        evaluation = evaluate_adr(self.receiver, [overhead], [], self.model, NOISE)
        self.assertEqual(evaluation.sc_sinr, evaluation.sc_snr)
        self.assertEqual(evaluation.mrc_sinr, evaluation.mrc_snr)
        self.assertGreaterEqual(evaluation.mrc_sinr, evaluation.sc_sinr)
        self.assertGreater(evaluation.branches[-1].snr, 0.0)
        for branch in evaluation.branches[:6]:
            self.assertEqual(branch.snr, 0.0)

    def test_interferer_seen_by_top_branch_only(self) -> None:
        serving = LambertianSource(Vec3(0.2, 1.0, 2.0), DOWN, lambertian_order(40), 4.0)
        overhead = LambertianSource(Vec3(1.0, 1.0, 2.0), DOWN, lambertian_order(65), 1.0)
        evaluation = evaluate_adr(self.receiver, [serving], [[overhead]], self.model, NOISE)
        for branch in evaluation.branches[:6]:
            self.assertEqual(branch.sinr, branch.snr)
        self.assertEqual(evaluation.branches[-1].interferers[0].p0, 0.0)
        self.assertGreater(evaluation.branches[-1].interferers[0].p1, 0.0)

    def test_vectorized_link_equations_match_scalar_ones(self) -> None:
        params = NoiseParams(bandwidth=1e9, preamp_noise_density=4.47e-12, background_current=2e-6)
        serving = np.array([[1e-6, 0.0, 3e-7]])
        interfering = np.array([[[2e-7, 5e-7, 0.0]], [[1e-7, 0.0, 4e-8]]])
        background = np.array([[5e-5, 1e-5, 0.0]])
        responsivity = np.array([0.4, 0.5, 0.4])
        snr, sinr, sigma = branch_link_arrays(serving, interfering, background, params, responsivity)
        for b in range(3):
            r = float(responsivity[b])
            signal = OokSignal.from_average(float(serving[0, b]))
            interferers = [OokSignal.from_average(float(g[0, b])) for g in interfering]
            expected_sigma = noise_sigma(signal.p1, params, r, background_power=float(background[0, b]))
            self.assertTrue(math.isclose(sigma[0, b], expected_sigma, rel_tol=1e-12))
            self.assertTrue(math.isclose(snr[0, b], branch_sinr(signal, [], expected_sigma, r), rel_tol=1e-12))
            self.assertTrue(math.isclose(sinr[0, b], branch_sinr(signal, interferers, expected_sigma, r), rel_tol=1e-12))
        self.assertEqual(sinr[0, 1], 0.0)
        self.assertLess(sinr[0, 0], snr[0, 0])

    def test_sources_out_of_view_leave_zero_sinr(self) -> None:
        upward = LambertianSource(Vec3(1.0, 1.0, 2.0), Vec3(0.0, 0.0, 1.0), 1.0, 1.0)
        with self.assertLogs("links.receiver", level="WARNING"):
            evaluation = evaluate_adr(self.receiver, [upward], [], self.model, NOISE)
        self.assertEqual(evaluation.mrc_sinr, 0.0)

    def test_branch_validation(self) -> None:
        branch = ReceiverBranch(azimuth=0.0, elevation=40.0, fov=25.0, area=4e-6, responsivity=0.4)
        self.assertAlmostEqual(branch.direction.z, math.sin(math.radians(40.0)))
        with self.assertRaises(ValueError):
            ReceiverBranch(azimuth=0.0, elevation=40.0, fov=95.0, area=4e-6, responsivity=0.4).aperture(Vec3(0, 0, 0))


class ScenarioModelTests(SimpleTestCase):
    def setUp(self) -> None:
        source = LambertianSource(Vec3(1.0, 1.0, 2.0), DOWN, 1.0, 1.0)
        self.micro = CellSystem(id="micro", sources=(source,), noise=NOISE)
        self.pico = CellSystem(id="pico", sources=(source,), noise=NOISE)
        self.atto = CellSystem(id="atto", sources=(source,), noise=NOISE)

    def test_labels(self) -> None:
        self.assertEqual(CoexistenceScenario(self.atto).label, "atto")
        both = CoexistenceScenario(self.atto, (self.micro, self.pico))
        self.assertEqual(both.label, "atto_vs_micro+pico")
        self.assertTrue(both.has_interference)
        intra = CoexistenceScenario(self.atto, intra_system_interference=True)
        self.assertTrue(intra.has_interference)

    def test_serving_cannot_interfere(self) -> None:
        with self.assertRaises(ValueError):
            CoexistenceScenario(self.atto, (self.atto,))
        with self.assertRaises(ValueError):
            CoexistenceScenario(self.atto, (self.micro, self.micro))
        with self.assertRaises(ValueError):
            CellSystem(id="pico", sources=(), noise=NOISE)

    def test_serving_ties_go_to_lowest_index(self) -> None:
        self.assertEqual(_pick_serving(np.array([1.0, 1.0 - 1e-12, 0.5])), (0, True))
        self.assertEqual(_pick_serving(np.array([0.5, 1.0])), (1, True))
        self.assertEqual(_pick_serving(np.array([0.5, 1.0, 1.0])), (1, True))
        self.assertEqual(_pick_serving(np.zeros(3)), (0, False))

    def test_to_db_floors_zero_power(self) -> None:
        np.testing.assert_allclose(to_db([100.0, 1.0, 0.0]), [20.0, 0.0, DB_FLOOR])

    def test_summary_of_constant_grid(self) -> None:
        grid = ScalarGrid(nx=2, ny=2, step=1.0, quantity="snr_db", values=(5.0,) * 4)
        summary = summarize(grid, threshold=5.0)
        self.assertEqual((summary.minimum, summary.maximum, summary.mean), (5.0, 5.0, 5.0))
        self.assertEqual(summary.coverage, 100.0)
        self.assertEqual(summarize(grid, threshold=5.1).coverage, 0.0)
        self.assertEqual(summary.argmin, Vec3(0.5, 0.5, 0.0))

    def test_summary_locates_extremes(self) -> None:
        grid = ScalarGrid(nx=2, ny=2, step=0.5, quantity="gain_db", values=(1.0, 3.0, -2.0, 0.5))
        summary = summarize(grid, threshold=0.75)
        self.assertEqual(summary.argmax, Vec3(0.75, 0.25, 0.0))
        self.assertEqual(summary.argmin, Vec3(0.25, 0.75, 0.0))
        self.assertAlmostEqual(summary.mean, 0.625)
        self.assertEqual(summary.coverage, 50.0)
        self.assertIsNone(summarize(grid).coverage)


class CoexistenceSweepTests(SimpleTestCase):
    """Sweeps over the default office scenario at the default 0.25 m grid."""

    @classmethod
    def setUpClass(cls) -> None:
        super().setUpClass()
        cls.simulation = SimulationRun(load_scenario(), threads=0)
        cls.grid = cls.simulation.grid
        cls.simulator = cls.simulation.simulator

    def _map(self, serving: str, interfering=(), combining: str = "mrc", intra: bool = False) -> np.ndarray:
        scenario = self.simulation.scenario(serving, interfering, intra=intra)
        return self.simulator.sweep_map(scenario, self.grid, combining).as_array()

    def test_snr_minimum_ordering(self) -> None:
        minima = {system: self._map(system).min() for system in ("micro", "pico", "atto")}
        self.assertGreater(minima["atto"], minima["pico"])
        self.assertGreater(minima["pico"], minima["micro"])

    def test_interference_never_raises_sinr(self) -> None:
        for serving, others in (("micro", ("pico", "atto")), ("pico", ("micro", "atto")), ("atto", ("micro", "pico"))):
            snr = self._map(serving)
            both = self._map(serving, others)
            for other in others:
                single = self._map(serving, (other,))
                self.assertTrue(np.all(single <= snr + 1e-9))
                self.assertTrue(np.all(both <= single + 1e-9))

    def test_intra_system_interference_lowers_atto(self) -> None:
        snr = self._map("atto")
        intra = self._map("atto", intra=True)
        self.assertTrue(np.all(intra <= snr + 1e-9))
        self.assertLess(intra.mean(), snr.mean())

    def test_pico_cell_is_the_nearest_unit(self) -> None:
        scenario = self.simulation.scenario("pico")
        maps = self.simulator.sweep(scenario, self.grid)
        units = [s.position for s in scenario.serving.sources]
        matches = 0
        for n, point in enumerate(self.grid):
            nearest = min(range(len(units)), key=lambda i: math.hypot(units[i].x - point.x, units[i].y - point.y))
            matches += int(maps.serving_index[n] == nearest)
        self.assertGreaterEqual(matches / len(self.grid), 0.95)

    def test_adr_rejects_micro_interference_on_atto(self) -> None:
        snr = self._map("atto")
        with_micro = self._map("atto", ("micro",))
        with_pico = self._map("atto", ("pico",))
        self.assertLess((snr - with_micro).mean(), 3.0)
        self.assertGreater(with_micro.mean(), with_pico.mean())

    def test_gain_bounds(self) -> None:
        bound = 10 * math.log10(7) + 1e-9
        for serving in ("micro", "pico", "atto"):
            gain = self.simulator.gain_map(self.simulation.scenario(serving), self.grid).as_array()
            self.assertTrue(np.all(gain >= -1e-9))
            self.assertTrue(np.all(gain <= bound))

    def test_micro_gain_grows_towards_the_walls(self) -> None:
        gain = self.simulator.gain_map(self.simulation.scenario("micro"), self.grid).as_array()
        # rows at y = 3.875 and 4.125 run through the transmitter
        row = gain[15:17, :]
        centre = row[:, 7:9].mean()
        side = row[:, [0, -1]].mean()
        self.assertLess(centre, 0.1)
        self.assertGreater(side, centre + 0.1)

        scenario = self.simulation.scenario("micro")
        under = self.simulator.evaluate_point(scenario, Vec3(2.0, 4.0, 1.0))
        beside = self.simulator.evaluate_point(scenario, Vec3(0.25, 4.0, 1.0))
        self.assertLessEqual(10 * math.log10(under.mrc_snr / under.sc_snr), 10 * math.log10(beside.mrc_snr / beside.sc_snr))
        self.assertLess(10 * math.log10(under.mrc_snr / under.sc_snr), 0.5)

    def test_point_evaluation_agrees_with_sweep(self) -> None:
        scenario = self.simulation.scenario("atto", ("micro", "pico"))
        values = self.simulator.sweep_map(scenario, self.grid, "mrc").values
        for index in (0, 137, 300, len(self.grid) - 1):
            evaluation = self.simulator.evaluate_point(scenario, self.grid[index])
            self.assertAlmostEqual(10 * math.log10(evaluation.mrc_sinr), values[index], places=6)

    def test_sweep_does_not_depend_on_thread_count(self) -> None:
        config = load_scenario(overrides={"sweep.grid_step": "1.0"})
        single = SimulationRun(config, threads=1)
        pooled = SimulationRun(config, threads=4)
        grid = cf_grid(config.room, 1.0)
        self.assertTrue(np.array_equal(single.simulator.power_tensor(grid), pooled.simulator.power_tensor(grid)))
        scenario = single.scenario("atto", ("micro",))
        self.assertEqual(
            single.simulator.sweep_map(scenario, grid, "mrc"),
            pooled.simulator.sweep_map(pooled.scenario("atto", ("micro",)), grid, "mrc"),
        )
