from scenarios.commands import SimulationCommand


class Command(SimulationCommand):
    help = 'Sweep the SINR map of the serving cell system against the interfering systems'
    command = 'sinr'
