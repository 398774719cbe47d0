"""Find source files shared verbatim across git repositories and follow how each copy evolves."""

__version__ = "0.1.0"
