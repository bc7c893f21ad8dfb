import sys

from mlmoments.cli import main

sys.exit(main())
