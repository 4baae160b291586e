"""freqhom: beam-splitter-free HOM interference between frequency bins.

Modules
-------
spectral      frequency grids, spectral modes, shaper masks, pi-step modes
jsa           joint spectral amplitudes and their Schmidt decomposition
fock          sparse truncated multimode Fock states and mode transformations
interference  heralded three-fold coincidences, delay and split-ratio scans
config, cli   configuration files and the command-line driver
"""
__version__ = "0.1.0"
