import sys

from saim.cli import main

sys.exit(main())
