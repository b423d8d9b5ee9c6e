"""Simulation and verification of joint sum-max limits for long-range dependent
heavy-tailed infinitely divisible processes driven by a null-recurrent chain."""

__version__ = "0.1.0"
