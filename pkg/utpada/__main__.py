import sys

from utpada.cli import main

sys.exit(main())
