"""Numerical experiments on the semiclassical limit of joint spectra."""

__version__ = "0.1.0"
