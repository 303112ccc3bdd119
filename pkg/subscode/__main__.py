import sys

from subscode.cli import main

sys.exit(main())
