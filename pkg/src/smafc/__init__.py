"""Simulation, tomography and certification toolkit for a multichannel Stark-modulated AFC memory."""

__version__ = "0.1.0"
