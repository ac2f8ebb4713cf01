import sys

from assetflow.main import cli_dispatch

sys.exit(cli_dispatch(sys.argv[1:]))
