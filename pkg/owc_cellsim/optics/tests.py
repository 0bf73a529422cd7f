import math
import random
from unittest.mock import patch

from django.test import SimpleTestCase
from scipy import integrate

from optics import propagation
from optics.emitters import (
    DOWN,
    LambertianSource,
    SystemId,
    SystemLayout,
    build_layout,
    lambertian_order,
    merge_coincident,
    radiant_intensity,
)
from optics.geometry import (
    DiscretizationPolicy,
    Room,
    ScalarGrid,
    SurfaceElement,
    Vec3,
    az_el_to_direction,
    cf_grid,
    discretize_room,
)
from optics.photometry import (
    IlluminanceMap,
    ZeroCoverageError,
    calibrate_flux,
    illuminance_at,
    illuminance_map,
)
from optics.propagation import (
    SOURCE_CACHE_SIZE,
    ChannelModel,
    CoincidentGeometryError,
    ReceiverAperture,
    brute_force_power_oracle,
    first_order_power,
    los_gain,
    received_power,
    second_order_power,
)
from scenarios.loader import load_scenario

UP = Vec3(0.0, 0.0, 1.0)
OFFICE_ROOM = Room(4.0, 8.0, 3.0, 0.8, 0.8, 0.3, 1.0)


def _source(position, orientation=DOWN, n=1.0, power=1.0, flux=0.0):
    return LambertianSource(
        position=position, orientation=orientation, order_n=n, optical_power=power, luminous_flux=flux,
    )


def _relative_gap(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


class GeometryTests(SimpleTestCase):
    def test_az_el_examples(self) -> None:
        self.assertEqual(az_el_to_direction(0, -90), Vec3(0.0, 0.0, -1.0))
        self.assertEqual(az_el_to_direction(123, -90), Vec3(0.0, 0.0, -1.0))
        horizontal = az_el_to_direction(0, 0)
        self.assertAlmostEqual(horizontal.x, 1.0)
        self.assertAlmostEqual(horizontal.y, 0.0)
        self.assertAlmostEqual(horizontal.z, 0.0)
        tilted = az_el_to_direction(45, -70)
        self.assertAlmostEqual(tilted.x, 0.2418, places=4)
        self.assertAlmostEqual(tilted.y, 0.2418, places=4)
        self.assertAlmostEqual(tilted.z, -0.9397, places=4)

    def test_directions_are_unit_norm(self) -> None:
        rng = random.Random(11)
        for _ in range(10_000):
            v = az_el_to_direction(rng.uniform(-720, 720), rng.uniform(-90, 90))
            self.assertLess(abs(v.norm() - 1.0), 1e-12)

    def test_unit_room_discretization(self) -> None:
        room = Room(1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.0)
        elements = discretize_room(room, 0.5)
        self.assertEqual(len(elements), 24)
        self.assertAlmostEqual(sum(e.area for e in elements), 6.0)

    def test_office_room_ceiling_counts(self) -> None:
        fine = [e for e in discretize_room(OFFICE_ROOM, 0.05) if e.normal.z < 0]
        coarse = [e for e in discretize_room(OFFICE_ROOM, 0.2) if e.normal.z < 0]
        self.assertEqual(len(fine), 12800)
        self.assertEqual(len(coarse), 800)

    def test_partial_tiles_conserve_area_and_face_inward(self) -> None:
        room = Room(1.3, 2.1, 1.7, 0.8, 0.6, 0.3, 0.5)
        elements = discretize_room(room, 0.4)
        floor = sum(e.area for e in elements if e.normal == UP)
        wall_x0 = sum(e.area for e in elements if e.normal == Vec3(1.0, 0.0, 0.0))
        self.assertLess(_relative_gap(floor, 1.3 * 2.1), 1e-9)
        self.assertLess(_relative_gap(wall_x0, 2.1 * 1.7), 1e-9)
        centre = room.centre
        for e in elements:
            self.assertGreater(e.normal.dot(centre - e.centre), 0.0)
        self.assertEqual({e.reflectivity for e in elements if e.normal == UP}, {0.3})

    def test_discretization_rejects_bad_sizes(self) -> None:
        with self.assertRaises(ValueError):
            discretize_room(OFFICE_ROOM, 0.0)
        with self.assertRaises(ValueError):
            discretize_room(OFFICE_ROOM, 3.5)

    def test_cf_grid_sizes(self) -> None:
        self.assertEqual(len(cf_grid(OFFICE_ROOM, 0.25)), 512)
        coarse = cf_grid(OFFICE_ROOM, 2.0)
        self.assertEqual((coarse.nx, coarse.ny), (2, 4))
        self.assertEqual(coarse[0], Vec3(1.0, 1.0, 1.0))
        self.assertEqual(coarse[coarse.index_of(1, 3)], Vec3(3.0, 7.0, 1.0))
        single = cf_grid(Room(1.0, 1.0, 2.0, 0.5, 0.5, 0.5, 0.8), 1.0)
        self.assertEqual(single.points, (Vec3(0.5, 0.5, 0.8),))

    def test_cf_grid_points_inside_floor(self) -> None:
        for p in cf_grid(OFFICE_ROOM, 0.25):
            self.assertEqual(p.z, 1.0)
            self.assertTrue(0 < p.x < 4 and 0 < p.y < 8)
        with self.assertRaises(ValueError):
            cf_grid(OFFICE_ROOM, 4.5)

    def test_scalar_grid_rejects_non_finite_values(self) -> None:
        with self.assertRaises(ValueError):
            ScalarGrid(nx=1, ny=1, step=1.0, quantity="lux", values=(math.nan,))
        with self.assertRaises(ValueError):
            ScalarGrid(nx=2, ny=1, step=1.0, quantity="lux", values=(1.0,))


class EmitterTests(SimpleTestCase):
    def test_lambertian_order_examples(self) -> None:
        self.assertAlmostEqual(lambertian_order(60), 1.0, places=12)
        n65 = lambertian_order(65)
        self.assertAlmostEqual(n65, 0.8047, delta=1e-4)
        self.assertAlmostEqual(math.cos(math.radians(65)) ** n65, 0.5, places=12)
        self.assertAlmostEqual(lambertian_order(21), 10.08, delta=0.01)

    def test_lambertian_order_rejects_out_of_range(self) -> None:
        for angle in (0, 90, -5, 120):
            with self.assertRaises(ValueError):
                lambertian_order(angle)

    def test_radiant_intensity(self) -> None:
        src = _source(Vec3(0, 0, 3))
        self.assertAlmostEqual(radiant_intensity(src, DOWN), 1 / math.pi)
        semi = _source(Vec3(0, 0, 3), n=lambertian_order(40))
        at_semi = az_el_to_direction(0, -50)
        self.assertAlmostEqual(radiant_intensity(semi, at_semi), radiant_intensity(semi, DOWN) / 2)
        self.assertEqual(radiant_intensity(src, Vec3(1.0, 0.0, 0.0)), 0.0)

    def test_intensity_is_monotone_in_angle(self) -> None:
        src = _source(Vec3(0, 0, 3), n=lambertian_order(21))
        values = [radiant_intensity(src, az_el_to_direction(0, -90 + phi)) for phi in range(0, 91)]
        self.assertTrue(all(a >= b for a, b in zip(values, values[1:])))

    def test_hemisphere_integral_matches_power(self) -> None:
        for semi_angle in (21, 40, 65, 70):
            n = lambertian_order(semi_angle)
            src = _source(Vec3(0, 0, 3), n=n, power=2.5)

            def ring(phi: float) -> float:
                return radiant_intensity(src, az_el_to_direction(0, -90 + math.degrees(phi))) * 2 * math.pi * math.sin(phi)

            total, _ = integrate.quad(ring, 0.0, math.pi / 2)
            self.assertLess(abs(total - 2.5) / 2.5, 0.005)

    def test_default_layout(self) -> None:
        config = load_scenario()
        layout = build_layout(config, luminous_flux=10.0)
        self.assertEqual(len(layout.micro), 1)
        self.assertEqual(len(layout.pico), 8)
        self.assertEqual(len(layout.atto), 32)
        self.assertEqual(len(layout.illumination), 40)
        self.assertEqual(len(layout.all_sources()), 81)
        self.assertEqual(layout.micro[0].position, Vec3(2.0, 4.0, 3.0))
        self.assertEqual(layout.micro[0].order_n, lambertian_order(65))
        first_atto = layout.atto[0]
        self.assertEqual(first_atto.position, Vec3(1.0, 1.0, 3.0))
        self.assertEqual(first_atto.orientation, az_el_to_direction(45, -70))
        self.assertEqual(first_atto.system_id, SystemId.ATTO)
        self.assertEqual({s.position for s in layout.illumination}, {
            Vec3(2.0, y, 3.0) for y in (1.0, 3.0, 5.0, 7.0)
        })
        self.assertEqual(layout.sources_for("pico"), layout.pico)
        self.assertEqual(build_layout(config, luminous_flux=10.0), layout)

    def test_merge_coincident_sums_output(self) -> None:
        lamp = _source(Vec3(1, 1, 3), power=0.3, flux=5.0)
        merged = merge_coincident((lamp,) * 10, power="luminous_flux")
        self.assertEqual(len(merged), 1)
        self.assertAlmostEqual(merged[0].luminous_flux, 50.0)
        self.assertEqual(merged[0].optical_power, 0.3)


class PropagationTests(SimpleTestCase):
    def test_los_gain_under_micro_transmitter(self) -> None:
        n = lambertian_order(65)
        src = _source(Vec3(2, 4, 3), n=n)
        rx = ReceiverAperture(Vec3(2, 4, 1), UP, fov=90.0, area=4e-6)
        expected = (n + 1) * 4e-6 / (2 * math.pi * 4)
        self.assertLess(_relative_gap(los_gain(src, rx), expected), 1e-12)
        self.assertAlmostEqual(los_gain(src, rx), 2.872e-7, delta=1e-10)

    def test_los_gain_cutoffs(self) -> None:
        src = _source(Vec3(2, 4, 3))
        narrow = ReceiverAperture(Vec3(3.5, 4, 1), UP, fov=30.0, area=1e-4)
        self.assertEqual(los_gain(src, narrow), 0.0)
        behind = ReceiverAperture(Vec3(3.0, 4.0, 3.5), DOWN, fov=90.0, area=1e-4)
        self.assertEqual(los_gain(src, behind), 0.0)
        with self.assertRaises(CoincidentGeometryError):
            los_gain(src, ReceiverAperture(Vec3(2, 4, 3), UP, fov=90.0, area=1e-4))

    def test_black_room_has_only_los(self) -> None:
        room = OFFICE_ROOM.with_reflectivity(0.0)
        src = _source(Vec3(2, 4, 3), n=lambertian_order(65))
        rx = ReceiverAperture(Vec3(1, 2, 1), UP, fov=90.0, area=4e-6)
        budget = received_power(src, rx, DiscretizationPolicy(0.05, 0.2), room)
        self.assertEqual(budget.first_order, 0.0)
        self.assertEqual(budget.second_order, 0.0)
        self.assertEqual(budget.total, budget.los)

    def test_fov_blocked_receiver_sees_reflections_only(self) -> None:
        room = Room(2.0, 2.0, 2.0, 0.8, 0.8, 0.3, 0.5)
        src = _source(Vec3(1, 1, 2))
        rx = ReceiverAperture(Vec3(1.2, 1.0, 0.5), Vec3(1.0, 0.0, 0.0), fov=40.0, area=1e-4)
        budget = received_power(src, rx, DiscretizationPolicy(0.25, 0.5), room)
        self.assertEqual(budget.los, 0.0)
        self.assertGreater(budget.total, 0.0)

    def test_empty_element_list_warns(self) -> None:
        src = _source(Vec3(1, 1, 2))
        rx = ReceiverAperture(Vec3(1, 1, 0.5), UP, fov=90.0, area=1e-4)
        with self.assertLogs("optics.propagation", level="WARNING"):
            self.assertEqual(first_order_power(src, rx, []), 0.0)

    def test_single_element_two_hop_product(self) -> None:
        element = SurfaceElement(centre=Vec3(0.5, 0.5, 0.0), normal=UP, area=0.01, reflectivity=0.5)
        src = _source(Vec3(0.5, 0.5, 2.0))
        rx = ReceiverAperture(Vec3(1.5, 0.5, 1.0), DOWN, fov=90.0, area=1e-4)
        incident = 1.0 * (2 / (2 * math.pi)) * 0.01 / 4.0
        collected = (1 / math.sqrt(2)) ** 2 * 1e-4 / (math.pi * 2.0)
        expected = incident * 0.5 * collected
        self.assertLess(_relative_gap(first_order_power(src, rx, [element]), expected), 1e-12)

    def test_two_element_three_hop_product(self) -> None:
        floor = SurfaceElement(centre=Vec3(0.0, 0.0, 0.0), normal=UP, area=0.01, reflectivity=0.6)
        wall = SurfaceElement(centre=Vec3(1.0, 0.0, 1.0), normal=Vec3(-1.0, 0.0, 0.0), area=0.01, reflectivity=0.7)
        src = _source(Vec3(0.0, 0.0, 2.0))
        rx = ReceiverAperture(Vec3(0.0, 0.0, 1.0), Vec3(1.0, 0.0, 0.0), fov=90.0, area=1e-4)
        incident = (1 / math.pi) * 0.01 / 4.0
        transfer = 0.5 * 0.01 / (2 * math.pi)
        collected = 1e-4 / math.pi
        expected = incident * 0.6 * transfer * 0.7 * collected
        self.assertLess(_relative_gap(second_order_power(src, rx, [floor, wall]), expected), 1e-12)

    def test_zero_reflectivity_gives_zero_reflections(self) -> None:
        room = Room(1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.2)
        elements = discretize_room(room, 0.25)
        src = _source(Vec3(0.5, 0.5, 1.0))
        rx = ReceiverAperture(Vec3(0.3, 0.6, 0.2), UP, fov=70.0, area=1e-4)
        self.assertEqual(first_order_power(src, rx, elements), 0.0)
        self.assertEqual(second_order_power(src, rx, elements), 0.0)
        oracle = brute_force_power_oracle(src, rx, room, 0.25)
        self.assertEqual(oracle.total, oracle.los)

    def test_matches_brute_force_oracle_on_random_scenes(self) -> None:
        rng = random.Random(2024)

        def unit_vector() -> Vec3:
            return az_el_to_direction(rng.uniform(0, 360), rng.uniform(-89, 89))

        for _ in range(20):
            room = Room(
                rng.uniform(1.0, 2.0), rng.uniform(1.0, 2.0), rng.uniform(1.0, 2.0),
                rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), 0.0,
            )
            size = rng.choice((0.3, 0.4, 0.5))

            def inside() -> Vec3:
                return Vec3(
                    rng.uniform(0.1, room.width_x - 0.1),
                    rng.uniform(0.1, room.length_y - 0.1),
                    rng.uniform(0.1, room.height_z - 0.1),
                )

            src = _source(inside(), orientation=unit_vector(), n=rng.uniform(0.5, 10.0), power=rng.uniform(0.1, 5.0))
            rx = ReceiverAperture(inside(), unit_vector(), fov=rng.uniform(20.0, 90.0), area=1e-4)
            model = ChannelModel(room, DiscretizationPolicy(size, size), max_order=2)
            budget = model.path_budget(src, rx)
            oracle = brute_force_power_oracle(src, rx, room, size)
            self.assertLess(_relative_gap(budget.los, oracle.los), 1e-10)
            self.assertLess(_relative_gap(budget.first_order, oracle.first_order), 1e-10)
            self.assertLess(_relative_gap(budget.second_order, oracle.second_order), 1e-10)

    def test_reflection_order_limit(self) -> None:
        room = Room(2.0, 2.0, 2.0, 0.8, 0.8, 0.3, 0.5)
        src = _source(Vec3(1, 1, 2))
        rx = ReceiverAperture(Vec3(0.5, 0.7, 0.5), UP, fov=60.0, area=1e-4)
        policy = DiscretizationPolicy(0.25, 0.5)
        los_only = ChannelModel(room, policy, max_order=0).path_budget(src, rx)
        first = ChannelModel(room, policy, max_order=1).path_budget(src, rx)
        full = ChannelModel(room, policy, max_order=2).path_budget(src, rx)
        self.assertEqual(los_only.first_order, 0.0)
        self.assertEqual(first.second_order, 0.0)
        self.assertGreater(full.second_order, 0.0)
        self.assertEqual(first.first_order, full.first_order)
        with self.assertRaises(ValueError):
            ChannelModel(room, policy, max_order=3)

    def test_source_term_cache_is_bounded(self) -> None:
        model = ChannelModel(Room(2.0, 2.0, 2.0, 0.8, 0.8, 0.3, 0.5), DiscretizationPolicy(0.5, 1.0))
        sources = [(_source(Vec3(0.5 + 0.01 * i, 1.0, 2.0)),) for i in range(SOURCE_CACHE_SIZE + 2)]
        for group in sources[:SOURCE_CACHE_SIZE]:
            model.prepare(group)
        model.prepare(sources[0])
        model.prepare(sources[-2])
        model.prepare(sources[-1])
        self.assertEqual(len(model._source_terms), SOURCE_CACHE_SIZE)
        self.assertIn(sources[0], model._source_terms)
        self.assertNotIn(sources[1], model._source_terms)
        self.assertNotIn(sources[2], model._source_terms)
        self.assertIn(sources[-1], model._source_terms)


class OfficeRoomPropagationTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls) -> None:
        super().setUpClass()
        cls.micro = _source(Vec3(2, 4, 3), n=lambertian_order(65))
        cls.model = ChannelModel(OFFICE_ROOM, DiscretizationPolicy(0.1, 0.2))

    def _rx(self, x: float, y: float) -> ReceiverAperture:
        return ReceiverAperture(Vec3(x, y, 1.0), UP, fov=90.0, area=4e-6)

    def test_reflections_are_non_negative(self) -> None:
        for point in cf_grid(OFFICE_ROOM, 1.0):
            budget = self.model.path_budget(self.micro, self._rx(point.x, point.y))
            self.assertGreaterEqual(budget.first_order, 0.0)
            self.assertGreaterEqual(budget.second_order, 0.0)
            self.assertGreaterEqual(budget.total, budget.los)

    def test_first_order_energy_bound(self) -> None:
        budget = self.model.path_budget(self.micro, self._rx(0.5, 0.5))
        self.assertLessEqual(budget.first_order, self.micro.optical_power * 0.8)

    def test_micro_power_is_mirror_symmetric(self) -> None:
        for x, y in ((0.375, 1.125), (1.625, 2.875), (0.125, 7.375)):
            base = self.model.path_budget(self.micro, self._rx(x, y)).total
            mirrored_x = self.model.path_budget(self.micro, self._rx(4 - x, y)).total
            mirrored_y = self.model.path_budget(self.micro, self._rx(x, 8 - y)).total
            self.assertLess(_relative_gap(base, mirrored_x), 1e-9)
            self.assertLess(_relative_gap(base, mirrored_y), 1e-9)

    def test_first_order_elements_converge(self) -> None:
        rx = self._rx(1.0, 2.0)
        fine = ChannelModel(OFFICE_ROOM, DiscretizationPolicy(0.05, 0.2)).path_budget(self.micro, rx)
        coarse = self.model.path_budget(self.micro, rx)
        self.assertLess(_relative_gap(fine.total, coarse.total), 0.02)
        self.assertLess(_relative_gap(fine.first_order, coarse.first_order), 0.01)


class PhotometryTests(SimpleTestCase):
    def test_single_source_on_axis(self) -> None:
        lamp = _source(Vec3(0, 0, 2), flux=1.0)
        self.assertAlmostEqual(illuminance_at(Vec3(0, 0, 1), [lamp]), 1 / math.pi, places=12)

    def test_point_behind_source_is_dark(self) -> None:
        lamp = _source(Vec3(0, 0, 2), flux=100.0)
        self.assertEqual(illuminance_at(Vec3(0.5, 0, 2.5), [lamp]), 0.0)

    def test_illuminance_is_linear_in_flux(self) -> None:
        point = Vec3(0.7, 1.3, 1.0)
        one = illuminance_at(point, [_source(Vec3(2, 1, 3), n=lambertian_order(70), flux=3.0)])
        two = illuminance_at(point, [_source(Vec3(2, 1, 3), n=lambertian_order(70), flux=6.0)])
        self.assertLess(_relative_gap(2 * one, two), 1e-12)

    def test_calibrated_default_layout_meets_lighting_window(self) -> None:
        layout = build_layout(load_scenario(), luminous_flux=1.0)
        model = ChannelModel(OFFICE_ROOM, DiscretizationPolicy(0.05, 0.2))
        flux = calibrate_flux(layout, OFFICE_ROOM, 306.4, include_reflections=True, model=model)
        lux = illuminance_map(layout.with_luminous_flux(flux), OFFICE_ROOM, 0.25, include_reflections=True, model=model)
        self.assertLess(_relative_gap(lux.min_lux, 306.4), 1e-9)
        self.assertGreaterEqual(lux.min_lux, 300.0)
        self.assertLessEqual(lux.max_lux, 1300.0)
        doubled = calibrate_flux(layout, OFFICE_ROOM, 612.8, include_reflections=True, model=model)
        self.assertLess(_relative_gap(doubled, 2 * flux), 1e-12)

    def test_direct_light_alone_overshoots_the_ceiling(self) -> None:
        layout = build_layout(load_scenario(), luminous_flux=1.0)
        flux = calibrate_flux(layout, OFFICE_ROOM, 306.4)
        lux = illuminance_map(layout.with_luminous_flux(flux), OFFICE_ROOM, 0.25)
        self.assertLess(_relative_gap(lux.min_lux, 306.4), 1e-9)
        self.assertAlmostEqual(lux.max_lux, 1301.44, delta=0.1)

    def test_reflected_map_reuses_the_channel_model(self) -> None:
        room = Room(2.0, 2.0, 2.0, 0.8, 0.8, 0.3, 0.5)
        lamp = _source(Vec3(1.0, 1.0, 2.0), n=lambertian_order(70), power=0.3, flux=1.0)
        layout = SystemLayout(micro=(), pico=(), atto=(), illumination=(lamp,))
        model = ChannelModel(room, DiscretizationPolicy(0.25, 0.5))
        with patch("optics.propagation._transfer_matrix", wraps=propagation._transfer_matrix) as build:
            flux = calibrate_flux(layout, room, 300.0, step=0.5, include_reflections=True, model=model)
            illuminance_map(layout.with_luminous_flux(flux), room, 0.5, include_reflections=True, model=model)
        self.assertEqual(build.call_count, 1)

    def test_reflected_map_needs_a_matching_model(self) -> None:
        room = Room(2.0, 2.0, 2.0, 0.8, 0.8, 0.3, 0.5)
        lamp = _source(Vec3(1.0, 1.0, 2.0), flux=1.0)
        layout = SystemLayout(micro=(), pico=(), atto=(), illumination=(lamp,))
        with self.assertRaises(ValueError):
            illuminance_map(layout, room, 0.5, include_reflections=True)
        with self.assertRaises(ValueError):
            illuminance_map(
                layout, room, 0.5, include_reflections=True,
                model=ChannelModel(OFFICE_ROOM, DiscretizationPolicy(0.5, 0.5)),
            )

    def test_illuminance_map_is_symmetric(self) -> None:
        layout = build_layout(load_scenario(), luminous_flux=50.0)
        values = illuminance_map(layout, OFFICE_ROOM, 0.25).grid.as_array()
        self.assertLess(abs(values - values[:, ::-1]).max() / values.max(), 1e-9)
        self.assertLess(abs(values - values[::-1, :]).max() / values.max(), 1e-9)

    def test_calibration_ratio(self) -> None:
        grid = ScalarGrid(nx=2, ny=1, step=1.0, quantity="lux", values=(0.1, 0.5))
        layout = build_layout(load_scenario(), luminous_flux=1.0)
        with patch("optics.photometry.illuminance_map", return_value=IlluminanceMap(grid, 0.1, 0.5)):
            self.assertAlmostEqual(calibrate_flux(layout, OFFICE_ROOM, 300.0), 3000.0)

    def test_unlit_floor_cannot_be_calibrated(self) -> None:
        upward = _source(Vec3(2, 4, 3), orientation=UP, flux=1.0)
        layout = SystemLayout(micro=(), pico=(), atto=(), illumination=(upward,))
        with self.assertRaises(ZeroCoverageError):
            calibrate_flux(layout, OFFICE_ROOM, 306.4)
        with self.assertRaises(ValueError):
            calibrate_flux(layout, OFFICE_ROOM, 0.0)

    def test_reflected_illuminance_adds_light(self) -> None:
        room = Room(2.0, 2.0, 2.0, 0.8, 0.8, 0.3, 0.5)
        lamp = _source(Vec3(1.0, 1.0, 2.0), n=lambertian_order(70), power=0.3, flux=100.0)
        layout = SystemLayout(micro=(), pico=(), atto=(), illumination=(lamp, lamp))
        black_room = room.with_reflectivity(0.0)
        direct = illuminance_map(layout, room, 0.5)
        reflected = illuminance_map(
            layout, room, 0.5, include_reflections=True, model=ChannelModel(room, DiscretizationPolicy(0.25, 0.5)),
        )
        for a, b in zip(direct.grid.values, reflected.grid.values):
            self.assertGreater(b, a)
        black = illuminance_map(
            layout, black_room, 0.5, include_reflections=True, model=ChannelModel(black_room, DiscretizationPolicy(0.25, 0.5)),
        )
        self.assertEqual(black.grid.values, direct.grid.values)
