import sys

from lpshrink.cli import main

sys.exit(main())
