"""Complex absorbing potential resonances for many-body Stark Hamiltonians."""

__version__ = "0.1.0"
