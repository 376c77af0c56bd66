"""Compact 2D electromechanical models for electrostatic pull-in of
microcantilevers: beam finite elements, electrostatic field solvers, a
staggered coupling driver, and reference oracles."""

__version__ = "0.1.0"
