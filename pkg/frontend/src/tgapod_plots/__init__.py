"""Plotting companion for tgapod runs: reads the solver's trace and summary
CSV files and renders the standard figures."""

__version__ = "0.1.0"
