"""
Supratransmission command-line entry point

    python supratransmission.py simulate --amplitude 1.79 --probes 60
    python supratransmission.py validate --quick
"""
import sys

from src.cli.main import main

if __name__ == '__main__':
    sys.exit(main())
