"""Davies generators, conditional expectations and mixing diagnostics for commuting spin chains."""

__version__ = "0.1.0"
