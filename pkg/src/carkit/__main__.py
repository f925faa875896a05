import sys

from carkit.cli import main

sys.exit(main())
