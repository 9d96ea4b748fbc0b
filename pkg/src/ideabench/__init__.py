"""ideabench: retrieval-augmented hypothesis generation workbench."""

__version__ = "0.1.0"
