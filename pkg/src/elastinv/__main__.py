import sys

from elastinv.cli import main

sys.exit(main())
