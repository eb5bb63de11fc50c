import sys

from offloadkit.harness.cli import main

sys.exit(main())
