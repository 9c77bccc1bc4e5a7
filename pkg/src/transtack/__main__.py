import sys

from transtack.cli import run

sys.exit(run())
