# run_bisim.py
#
# Entry point: python run_bisim.py check samples/example1.ppda pXZ rX --depth 8

import sys

from app.cli import run

if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
