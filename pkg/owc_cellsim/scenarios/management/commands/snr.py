from scenarios.commands import SimulationCommand


class Command(SimulationCommand):
    help = 'Sweep the SNR map of the serving cell system (no interference)'
    command = 'snr'

    def overrides(self, options):
        flags = super().overrides(options)
        flags['sweep.interfering'] = 'none'
        return flags
