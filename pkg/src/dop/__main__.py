import sys

from dop.cli import main

sys.exit(main())
