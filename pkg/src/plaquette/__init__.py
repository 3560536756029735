"""Square plaquette model: exact small-box analysis, canonical-path flow
bounds, and event-driven Glauber simulation."""

__version__ = "0.1.0"
