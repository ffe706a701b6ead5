"""
python -m kgsim
"""

import sys

from .cli import main

sys.exit(main())
