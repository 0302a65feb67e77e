"""Allow ``python -m rsorecon``."""

import sys

from .cli import main

sys.exit(main())
