"""
Management command computing the illuminance map on the communication floor.

``--calibrate`` first solves for the per-LD flux that lifts the minimum to TARGET lux
(the scenario's target_min_lux when no value is given).
"""
from scenarios.commands import SimulationCommand, fail
from scenarios.forms import CALIBRATE


class Command(SimulationCommand):
    help = 'Compute the illuminance (lx) map on the communication floor'
    command = 'illumination'
    sweep_options = False

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            '--calibrate',
            nargs='?',
            const=CALIBRATE,
            metavar='TARGET',
            help='Calibrate per-LD flux so the minimum illuminance equals TARGET lux',
        )

    def overrides(self, options):
        flags = super().overrides(options)
        if options.get('calibrate') == CALIBRATE:
            flags['illumination.luminous_flux'] = CALIBRATE
        return flags

    def run_options(self, options):
        extra = super().run_options(options)
        calibrate = options.get('calibrate')
        if calibrate is None or calibrate == CALIBRATE:
            return extra
        try:
            target = float(calibrate)
        except ValueError:
            raise fail('E_USAGE', f"--calibrate expects a lux value, got {calibrate!r}")
        if target <= 0:
            raise fail('E_USAGE', "--calibrate target must be positive")
        extra['calibrate_target'] = target
        return extra

    def report(self, result):
        self.stdout.write(self.style.SUCCESS(f"Luminous flux per LD: {result.luminous_flux:.6g} lm"))
        super().report(result)
