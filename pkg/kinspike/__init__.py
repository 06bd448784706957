"""
kinspike
Sparse event encoding, recurrent/convolutional classification and spiking
conversion of surgical-simulator kinematic logs.
"""

__version__ = "1.0.0"
