"""Entry point for python -m uwradio_loc."""

from .main import cli

if __name__ == "__main__":
    cli()
