import sys

from sailor.cli import main

if __name__ == "__main__":
    sys.exit(main())
