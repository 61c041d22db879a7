"""Simulator and verification suite for 2D stochastic Navier-Stokes in a
periodic channel driven by boundary noise."""

__version__ = "0.1.0"
