"""Energy-stable finite elements for two-phase Navier-Stokes Cahn-Hilliard flow."""

__version__ = "0.1.0"
