"""
Management command producing every map in one run: the illuminance map and, for each
serving system, its SNR map and SINR maps against every other system and both together,
in SC and MRC, plus the MRC over SC gain maps.
"""
from scenarios.commands import SimulationCommand


class Command(SimulationCommand):
    help = 'Write the full set of illuminance, SNR, SINR and gain maps'
    command = 'report'
    sweep_options = False
