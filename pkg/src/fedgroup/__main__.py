import sys

from fedgroup.cli import main

sys.exit(main())
