"""helix-waves: information dynamics, KdV solitons and logistic epidemic waves."""

__version__ = "0.1.0"
TOOL_NAME = "helix-waves"
