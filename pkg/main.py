"""
Main entry point for the FairTree command-line tool.

Fits interpretable clustering trees that balance cluster compactness against
group fairness, and scores, exports and applies the fitted models.

Modules:
    cli.commands: Argument parsing and the fit / predict / evaluate / synth /
        sweep / export / bench subcommands.
    sys: Used for the process exit code.

Execution:
    When run as the main module, this script parses the command line, runs the
    chosen subcommand and exits with its status (0 ok, 2 error, 3 exhausted).
"""

import sys

from cli.commands import main

if __name__ == "__main__":
    sys.exit(main())
