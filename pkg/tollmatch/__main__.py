import sys

from tollmatch.main import main

sys.exit(main())
