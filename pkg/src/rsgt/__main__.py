import sys

from rsgt.cli import main

sys.exit(main())
