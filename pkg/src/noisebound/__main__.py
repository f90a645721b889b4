import sys

from noisebound.cli import main

sys.exit(main())
