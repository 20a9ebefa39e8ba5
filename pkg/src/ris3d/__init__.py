"""Joint 3D shape and load-configuration optimization of mutually coupled
reconfigurable intelligent surfaces under an impedance channel model."""

__version__ = "0.1.0"
