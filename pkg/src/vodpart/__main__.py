import sys

from vodpart.cli import main

sys.exit(main())
