import sys

from adncount.cli import main

sys.exit(main())
