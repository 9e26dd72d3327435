"""
CCD Finite-Size Lab - finite-size error laboratory for periodic MP2/MP3/CCD(n)

A Python tool that builds a model periodic solid, evaluates correlation
energy and amplitude diagrams on Monkhorst-Pack meshes, measures empirical
convergence exponents, and checks singular trapezoidal-rule error rates.
"""

__version__ = "0.1.0"
