import sys

from fellcheck.main import main

sys.exit(main())
