from scenarios.commands import SimulationCommand


class Command(SimulationCommand):
    help = 'Map the MRC over SC combining gain (dB) of the serving cell system'
    command = 'gain'
