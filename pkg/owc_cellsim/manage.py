#!/usr/bin/env python
"""Run simulator commands from a source checkout, e.g. ``python manage.py snr --serving atto``."""
import sys

from owc_cellsim.cli import main

if __name__ == '__main__':
    main(sys.argv[1:])
