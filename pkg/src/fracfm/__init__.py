"""Imaging interfacial linear-slip fractures from elastic far-field data.

Modules
-------
wavecore     Kupradze kernel, plane waves, tractions, Herglotz fields.
geometry     Direction grids, crack and interface meshes, sampling surfaces.
background   Background response of intact composites (boundary elements).
fracture     Forward scattering by linear-slip fractures.
inversion    F_sharp factorization, regularization and indicator maps.
presets      Named experiment scenes.
pipeline     Configs, archives, runs and validation suites.
cli          Command-line entry point.
"""
__version__ = "0.1.0"
