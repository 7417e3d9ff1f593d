"""Toolkit for parabolic representation pairs of punctured-surface groups:
validation, deformation calculus, stability (directly and through the
star-shaped quiver), numerical moment-map metrics, and Deligne-extension
residue calculus."""

__version__ = "0.1.0"
