import sys

from fracrothe.cli import main

sys.exit(main())
