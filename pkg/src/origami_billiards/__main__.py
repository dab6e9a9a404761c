import sys

from .cli_export import main

sys.exit(main())
