import sys

from crackchain.cli import main

sys.exit(main())
