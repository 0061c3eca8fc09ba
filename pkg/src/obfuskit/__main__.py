import sys

from obfuskit.harness.cli import main

sys.exit(main())
