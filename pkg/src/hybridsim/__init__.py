"""Simulator for cold 87Rb atoms in an optical lattice coupled to magnetic micro-cantilevers."""

__version__ = "0.1.0"
