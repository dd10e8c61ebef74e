"""uwradio-loc: cooperative self-positioning and target tracking for underwater radio sensor networks."""

__version__ = "0.1.0"
