"""Square root normal field toolkit: SRNF of sampled surfaces, the SRNF
pseudometric, degenerate surface pairs and area-preserving flat-place maps."""

__version__ = "0.1.0"
