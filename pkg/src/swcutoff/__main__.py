import sys

from swcutoff.cli import main

sys.exit(main())
