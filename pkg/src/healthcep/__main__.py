import sys

from healthcep.runtime.cli import main

sys.exit(main())
