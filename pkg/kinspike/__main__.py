import sys

from kinspike.orchestration.cli import main

if __name__ == "__main__":
    sys.exit(main())
