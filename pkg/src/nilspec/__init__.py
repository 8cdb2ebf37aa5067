"""Numerics for isospectral two-step nilpotent metric groups.

Submodules: :mod:`algebra`, :mod:`funcspace`, :mod:`operators`, :mod:`radon`,
:mod:`intertwine`, :mod:`spectra` and the command line driver :mod:`cli`.
"""

__version__ = "0.1.0"
