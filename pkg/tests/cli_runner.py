"""In-process CLI invocation helper shared by CLI and acceptance tests."""

from dialectshot.cli import main as cli_main


def run_cli(args):
    return cli_main([str(a) for a in args])
