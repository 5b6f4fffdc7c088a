import sys

from reinhardt.cli import main

sys.exit(main())
