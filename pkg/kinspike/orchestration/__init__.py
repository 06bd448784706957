"""Stage functions, the Prefect reproduction flow and the command-line entry point."""
