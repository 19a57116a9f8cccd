#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Main entry point for running evsync as a module.
Example: python -m evsync run --preset four_sensor_ring
"""

import sys

from evsync.cli import main

if __name__ == "__main__":
    sys.exit(main())
