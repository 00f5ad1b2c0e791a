"""Render figures from corrspin CSV/JSON experiment outputs.

Consumes only the documented file contract of the simulation CLI (the
11-column long-format CSV plus summary.json); it never imports the
simulation code.
"""

from .render import FigureJob, SchemaError, load_table, render

__all__ = ["FigureJob", "SchemaError", "load_table", "render"]

__version__ = "0.1.0"
