import sys

from satrdo.cli import main

sys.exit(main())
