#!/usr/bin/env python
"""Simple wrapper script for running mtcov."""

import sys

from mtcov.main import main

if __name__ == "__main__":
    sys.exit(main())
