import sys

from acdc_plf.main import main

sys.exit(main())
