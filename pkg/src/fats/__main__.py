import sys

from fats.cli import main

sys.exit(main())
