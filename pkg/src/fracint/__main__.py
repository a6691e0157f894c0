import sys

from fracint.cli import main

sys.exit(main())
