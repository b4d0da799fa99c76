import sys

from .semicli.cli import main

sys.exit(main())
