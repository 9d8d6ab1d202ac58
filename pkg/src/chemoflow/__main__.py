import sys

from chemoflow.cli import main

sys.exit(main())
