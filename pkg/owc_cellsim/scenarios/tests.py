import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest.mock import patch

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from links.coexistence import summarize
from optics.geometry import ScalarGrid
from optics.photometry import ZeroCoverageError
from scenarios.commands import parse_probe
from scenarios.grid_output import OutputError, format_summary, read_grid_csv, write_grid_csv
from scenarios.loader import (
    ScenarioParseError,
    ScenarioValidationError,
    deep_merge,
    flatten,
    load_scenario,
    scenario_to_dict,
    write_scenario,
)
from scenarios.runner import InvalidCombinationError, SimulationRun, gain_filename, map_filename, run_command


class ScenarioLoaderTests(SimpleTestCase):
    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)

    def _write(self, name: str, text: str) -> Path:
        path = self.dir / name
        path.write_text(text, encoding="utf-8")
        return path

    def test_defaults(self) -> None:
        config = load_scenario()
        self.assertEqual(config.room.width_x, 4.0)
        self.assertEqual(config.room.comm_floor_z, 1.0)
        self.assertEqual(config.discretization.first_order_element, 0.05)
        self.assertEqual(config.systems["atto"].bandwidth, 5e9)
        self.assertEqual(config.layout.atto_azimuths, (45.0, 135.0, 225.0, 315.0))
        self.assertTrue(config.needs_calibration)
        self.assertTrue(config.illumination.include_reflections)
        self.assertEqual(config.sweep.interfering, ("micro",))

    def test_empty_file_keeps_defaults(self) -> None:
        self.assertEqual(load_scenario(self._write("empty.json", "")), load_scenario())
        self.assertEqual(load_scenario(self._write("object.json", "{}")), load_scenario())

    def test_partial_file_overrides_one_key(self) -> None:
        path = self._write("pico.json", json.dumps({"systems": {"pico": {"optical_power": 2.0}}}))
        config = load_scenario(path)
        self.assertEqual(config.systems["pico"].optical_power, 2.0)
        self.assertEqual(config.systems["pico"].bandwidth, 1e9)

    def test_negative_bandwidth_names_the_key(self) -> None:
        path = self._write("bad.json", json.dumps({"systems": {"pico": {"bandwidth": -1}}}))
        with self.assertRaises(ScenarioValidationError) as ctx:
            load_scenario(path)
        self.assertEqual(ctx.exception.key, "systems.pico.bandwidth")
        self.assertEqual(ctx.exception.code, "E_CONFIG")
        self.assertTrue(str(ctx.exception).startswith("systems.pico.bandwidth: "))

    def test_unknown_key_is_rejected(self) -> None:
        path = self._write("typo.json", json.dumps({"room": {"widht": 5}}))
        with self.assertRaises(ScenarioValidationError) as ctx:
            load_scenario(path)
        self.assertEqual(ctx.exception.key, "room.widht")
        with self.assertRaises(ScenarioValidationError):
            load_scenario(overrides={"sweep.gridstep": "0.5"})

    def test_parse_error_reports_position(self) -> None:
        path = self._write("broken.json", '{\n  "room": {\n    "width": ,\n  }\n}\n')
        with self.assertRaises(ScenarioParseError) as ctx:
            load_scenario(path)
        self.assertEqual((ctx.exception.line, ctx.exception.column), (3, 14))
        self.assertTrue(str(ctx.exception).startswith(f"{path}:3:14: "))

    def test_non_object_document(self) -> None:
        with self.assertRaises(ScenarioValidationError):
            load_scenario(self._write("list.json", "[1, 2]"))

    def test_cross_field_rules(self) -> None:
        cases = {
            "room.communication_floor": {"room": {"communication_floor": 3.5}},
            "discretization.second_order_element": {"discretization": {"second_order_element": 0.01}},
            "sweep.grid_step": {"sweep": {"grid_step": 5.0}},
            "layout.micro.position": {"layout": {"micro": {"position": [5.0, 4.0, 3.0]}}},
            "layout.adt.atto_azimuths": {"layout": {"adt": {"atto_azimuths": [0, 90, 180]}}},
            "receiver.side_fov": {"receiver": {"side_fov": 120}},
            "sweep.target_ber": {"sweep": {"target_ber": 0.7}},
        }
        for key, document in cases.items():
            with self.subTest(key=key):
                with self.assertRaises(ScenarioValidationError) as ctx:
                    load_scenario(self._write("case.json", json.dumps(document)))
                self.assertEqual(ctx.exception.key, key)

    def test_serving_conflict_is_a_scenario_error(self) -> None:
        with self.assertRaises(ScenarioValidationError) as ctx:
            load_scenario(overrides={"sweep.serving": "pico", "sweep.interfering": "pico,micro"})
        self.assertEqual(ctx.exception.code, "E_SCENARIO")

    def test_serving_override_drops_inherited_interferer(self) -> None:
        micro = load_scenario(overrides={"sweep.serving": "micro"})
        self.assertEqual((micro.sweep.serving, micro.sweep.interfering), ("micro", ()))
        pico = load_scenario(overrides={"sweep.serving": "pico"})
        self.assertEqual(pico.sweep.interfering, ("micro",))
        path = self._write("pair.json", json.dumps({"sweep": {"serving": "pico", "interfering": ["micro", "atto"]}}))
        atto = load_scenario(path, overrides={"sweep.serving": "atto"})
        self.assertEqual(atto.sweep.interfering, ("micro",))

    def test_overrides_accept_flag_strings(self) -> None:
        config = load_scenario(overrides={
            "sweep.grid_step": "0.5",
            "sweep.interfering": "none",
            "sweep.combining": "sc",
            "illumination.luminous_flux": "42",
        })
        self.assertEqual(config.sweep.grid_step, 0.5)
        self.assertEqual(config.sweep.interfering, ())
        self.assertEqual(config.sweep.combining, "sc")
        self.assertEqual(config.illumination.luminous_flux, 42.0)
        self.assertFalse(config.needs_calibration)

    def test_written_scenario_loads_back(self) -> None:
        config = load_scenario(overrides={"sweep.serving": "pico", "illumination.luminous_flux": "12.5"})
        path = write_scenario(config, self.dir / "roundtrip.json")
        self.assertEqual(load_scenario(path), config)
        self.assertEqual(flatten(scenario_to_dict(config))["sweep.serving"], "pico")

    def test_empty_output_directory_uses_setting(self) -> None:
        path = self._write("out.json", json.dumps({"output": {"directory": ""}}))
        with override_settings(OWC_OUTPUT_DIR="/tmp/owc-elsewhere"):
            self.assertEqual(load_scenario(path).output_dir, "/tmp/owc-elsewhere")

    def test_deep_merge(self) -> None:
        merged = deep_merge({"a": {"b": 1, "c": 2}, "d": [1]}, {"a": {"c": 3}, "d": [2]})
        self.assertEqual(merged, {"a": {"b": 1, "c": 3}, "d": [2]})


class GridOutputTests(SimpleTestCase):
    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)
        self.grid = ScalarGrid(nx=3, ny=2, step=0.5, quantity="snr_db", values=(1.0, 2.5, -3.0, 0.25, 4.0, 10.0), z=1.0)

    def test_grid_file_layout(self) -> None:
        path = write_grid_csv(self.grid, self.dir / "snr_atto_mrc.csv")
        lines = path.read_text(encoding="utf-8").splitlines()
        self.assertEqual(lines[0], "nx=3,ny=2,step=0.5,quantity=snr_db")
        self.assertEqual(lines[1], "1,2.5,-3")
        self.assertEqual(lines[2], "0.25,4,10")
        self.assertEqual(read_grid_csv(path, z=1.0), self.grid)

    def test_malformed_grid_file(self) -> None:
        path = self.dir / "bad.csv"
        path.write_text("nx=2,ny=1,step=1,quantity=lux\n1,2,3\n", encoding="utf-8")
        with self.assertRaises(ValueError):
            read_grid_csv(path)

    def test_unwritable_path(self) -> None:
        blocker = self.dir / "file"
        blocker.write_text("x", encoding="utf-8")
        with self.assertRaises(OutputError):
            write_grid_csv(self.grid, blocker / "grid.csv")

    def test_summary_text(self) -> None:
        text = format_summary("snr_atto_mrc.csv", summarize(self.grid, threshold=2.0), ["rate: 5000.0 Mbit/s"])
        self.assertIn("min: -3 at (1.25, 0.25)", text)
        self.assertIn("max: 10 at (1.25, 0.75)", text)
        self.assertIn("coverage: 50.00% at >= 2", text)
        self.assertTrue(text.endswith("rate: 5000.0 Mbit/s"))

    def test_file_names(self) -> None:
        config = load_scenario()
        run = SimulationRun(config, threads=1)
        plain = run.scenario("atto")
        mixed = run.scenario("atto", ("micro", "pico"))
        self.assertEqual(map_filename(plain, "mrc"), "snr_atto_mrc.csv")
        self.assertEqual(map_filename(mixed, "sc"), "sinr_atto_vs_micro+pico_sc.csv")
        self.assertEqual(gain_filename(mixed), "gain_sinr_atto_vs_micro+pico.csv")

    def test_probe_parsing(self) -> None:
        self.assertEqual(parse_probe("2,4"), (2.0, 4.0))
        with self.assertRaises(ValueError):
            parse_probe("2")


class CommandTests(SimpleTestCase):
    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)
        self.stdout = StringIO()

    def _call(self, name: str, *args, **options) -> str:
        call_command(name, *args, stdout=self.stdout, stderr=StringIO(), **options)
        return self.stdout.getvalue()

    def test_illumination_calibration(self) -> None:
        out = self._call("illumination", "--calibrate", "306.4", out=str(self.dir))
        self.assertIn("Luminous flux per LD", out)
        grid = read_grid_csv(self.dir / "illumination_lux.csv")
        self.assertEqual((grid.nx, grid.ny), (16, 32))
        self.assertAlmostEqual(min(grid.values), 306.4, places=4)
        self.assertLessEqual(max(grid.values), 1300.0)
        self.assertTrue((self.dir / "illumination_summary.txt").exists())

    def test_illumination_rejects_bad_target(self) -> None:
        with self.assertRaises(CommandError) as ctx:
            self._call("illumination", calibrate="-3", out=str(self.dir))
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertTrue(str(ctx.exception).startswith("E_USAGE"))

    def test_zero_coverage_calibration(self) -> None:
        with patch("scenarios.runner.calibrate_flux", side_effect=ZeroCoverageError("floor unlit")):
            with self.assertRaises(CommandError) as ctx:
                self._call("illumination", calibrate="306.4", out=str(self.dir))
        self.assertEqual(ctx.exception.returncode, 5)
        self.assertTrue(str(ctx.exception).startswith("E_CALIBRATION"))

    def test_sinr_writes_named_map(self) -> None:
        self._call(
            "sinr", serving="atto", interfering="micro,pico", combining="sc",
            grid_step="2.0", out=str(self.dir), probe="1,3",
        )
        grid = read_grid_csv(self.dir / "sinr_atto_vs_micro+pico_sc.csv")
        self.assertEqual(grid.quantity, "sinr_db")
        self.assertEqual((grid.nx, grid.ny), (2, 4))
        self.assertIn("MRC sinr", self.stdout.getvalue())

    def test_snr_ignores_interferers(self) -> None:
        self._call("snr", serving="micro", grid_step="2.0", out=str(self.dir))
        self._call("snr", serving="pico", interfering="pico", grid_step="2.0", out=str(self.dir))
        for name in ("snr_micro_mrc.csv", "snr_pico_mrc.csv"):
            grid = read_grid_csv(self.dir / name)
            self.assertEqual(grid.quantity, "snr_db")
            self.assertEqual((grid.nx, grid.ny), (2, 4))

    def test_gain_with_serving_override(self) -> None:
        self._call("gain", serving="micro", grid_step="2.0", out=str(self.dir))
        self.assertTrue((self.dir / "gain_snr_micro.csv").exists())
        self._call("gain", serving="micro", interfering="pico", grid_step="2.0", out=str(self.dir))
        self.assertTrue((self.dir / "gain_sinr_micro_vs_pico.csv").exists())

    def test_bad_combining_is_a_usage_error(self) -> None:
        with self.assertRaises(CommandError) as ctx:
            self._call("snr", combining="egc", out=str(self.dir))
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertTrue(str(ctx.exception).startswith("E_USAGE"))

    def test_serving_conflict_exit_code(self) -> None:
        with self.assertRaises(CommandError) as ctx:
            self._call("sinr", serving="pico", interfering="pico", grid_step="2.0", out=str(self.dir))
        self.assertEqual(ctx.exception.returncode, 3)
        self.assertTrue(str(ctx.exception).startswith("E_SCENARIO"))

    def test_sinr_without_interferers(self) -> None:
        with self.assertRaises(CommandError) as ctx:
            self._call("sinr", interfering="none", grid_step="2.0", out=str(self.dir))
        self.assertEqual(ctx.exception.returncode, 3)
        config = load_scenario(overrides={"sweep.interfering": "none", "sweep.grid_step": "2.0"})
        with self.assertRaises(InvalidCombinationError):
            run_command("sinr", config, out_dir=self.dir, threads=1)

    def test_bad_config_exit_code(self) -> None:
        path = self.dir / "broken.json"
        path.write_text("{", encoding="utf-8")
        with self.assertRaises(CommandError) as ctx:
            self._call("snr", config=str(path), out=str(self.dir))
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertTrue(str(ctx.exception).startswith("E_CONFIG"))

    def test_unwritable_output(self) -> None:
        blocker = self.dir / "taken"
        blocker.write_text("x", encoding="utf-8")
        with self.assertRaises(CommandError) as ctx:
            self._call("gain", grid_step="2.0", out=str(blocker / "sub"))
        self.assertEqual(ctx.exception.returncode, 4)
        self.assertTrue(str(ctx.exception).startswith("E_OUTPUT"))

    def test_report_is_identical_across_thread_counts(self) -> None:
        single, pooled = self.dir / "single", self.dir / "pooled"
        with override_settings(OWC_THREADS=1):
            self._call("report", grid_step="0.5", out=str(single))
        with override_settings(OWC_THREADS=8):
            self._call("report", grid_step="0.5", out=str(pooled))
        names = sorted(p.name for p in single.iterdir())
        self.assertEqual(names, sorted(p.name for p in pooled.iterdir()))
        self.assertIn("illumination_lux.csv", names)
        self.assertIn("gain_sinr_atto_vs_micro+pico.csv", names)
        self.assertIn("snr_micro_sc.csv", names)
        self.assertEqual(len([n for n in names if n.endswith(".csv")]), 1 + 3 * 4 * 3)
        for name in names:
            self.assertEqual((single / name).read_bytes(), (pooled / name).read_bytes(), name)
