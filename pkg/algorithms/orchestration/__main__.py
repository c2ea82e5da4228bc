import sys

from algorithms.orchestration.cli import main

sys.exit(main())
