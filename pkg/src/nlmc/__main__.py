import sys

from nlmc.runner.cli import main

sys.exit(main())
