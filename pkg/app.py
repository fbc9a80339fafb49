#!/usr/bin/env python3
"""
Sphere Exponential - Entry Point
--------------------------------
This file starts the command-line front end.

    python app.py exp --input matrix.json --backend all
"""

import sys

from expm_cli import main

if __name__ == '__main__':
    sys.exit(main())
