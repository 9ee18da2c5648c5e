"""
Mimetic spectral elements for the vorticity-velocity-pressure Stokes problem.
"""
__version__ = "0.1"
