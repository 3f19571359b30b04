"""
Interval Tuner Package

This package builds random-forest prediction intervals, tunes the forest's
MTRY parameter with eight validation techniques, tags the benefit of each
technique against the default configuration and meta-validates the choice of
technique, for any CSV regression dataset.
"""

__version__ = '0.1.0'
